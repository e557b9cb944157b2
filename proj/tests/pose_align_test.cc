#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mapprior/errors.h"
#include "mapprior/pose_align.h"
#include "oracles.h"
#include "scenes.h"

namespace mapprior {
namespace {

double PoseGap(const Pose& a, const Pose& b) {
  return std::max((a.translation() - b.translation()).norm(),
                  a.rotation().angularDistance(b.rotation()));
}

TEST(SE3, ExpLogRoundTrip) {
  std::mt19937_64 rng(401);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    Vector6d xi;
    for (int k = 0; k < 6; ++k) xi[k] = u(rng) * (k < 3 ? 1.5 : 20.0);
    if (trial % 4 == 0) xi.head<3>() *= 1e-4;  // series branch
    if (trial % 4 == 1) xi.head<3>() *= 1e-9;
    const Vector6d back = LogSE3(ExpSE3(xi));
    EXPECT_LT((back - xi).norm(), 1e-9) << xi.transpose();
  }
  EXPECT_LT(PoseGap(ExpSE3(Vector6d::Zero()), Pose()), 1e-15);
}

TEST(SE3, ExpMatchesAngleAxis) {
  Vector6d xi;
  xi << 0, 0, M_PI / 2, 1, 0, 0;
  const Pose p = ExpSE3(xi);
  const Eigen::Vector3d x = p.rotation() * Eigen::Vector3d::UnitX();
  EXPECT_NEAR(x.y(), 1.0, 1e-15);
  // Translation is V * rho with V for a quarter turn.
  EXPECT_NEAR(p.translation().x(), std::sin(M_PI / 2) / (M_PI / 2), 1e-12);
  EXPECT_NEAR(p.translation().y(), (1 - std::cos(M_PI / 2)) / (M_PI / 2), 1e-12);
}

TEST(SE3, LogNearPi) {
  Vector6d xi;
  xi << 0, M_PI - 1e-7, 0, 0.5, 0.1, -0.2;
  const Vector6d back = LogSE3(ExpSE3(xi));
  EXPECT_LT((back - xi).norm(), 1e-6);
}

TEST(FitRigidTransform, RecoversExactTransform) {
  std::mt19937_64 rng(402);
  const Pose truth = oracle::RandomPose(rng, 5.0, 1.0);
  const PointCloud c = testing::UniformCloud(rng, 100, {-3, -3, -3}, {3, 3, 3});
  std::vector<Eigen::Vector3d> to;
  for (const Point3& p : c.positions) to.push_back(truth * p);
  EXPECT_LT(PoseGap(FitRigidTransform(c.positions, to), truth), 1e-12);
}

TEST(Icp, RecoversPerturbation) {
  std::mt19937_64 rng(403);
  int ok = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud target = testing::StructuredScene(rng, 3000);
    const Pose truth = oracle::RandomPose(rng, 0.5, 5.0 * M_PI / 180.0);
    // source = truth^-1 * target, so truth maps source into target.
    const PointCloud source = TransformPoints(Invert(truth), target);
    const IcpResult r = IcpRegister(source, target, Pose());
    ok += PoseGap(r.relative, truth) < 1e-3;
  }
  EXPECT_GE(ok, 9);
}

TEST(Icp, NoOverlapThrows) {
  std::mt19937_64 rng(404);
  const PointCloud a = testing::UniformCloud(rng, 200, {0, 0, 0}, {1, 1, 1});
  const PointCloud b = TransformPoints(Pose::FromTranslation({100, 0, 0}), a);
  EXPECT_THROW(IcpRegister(a, b, Pose()), NumericalError);
}

PoseGraphEdge Edge(const std::string& a, const std::string& b,
                   const std::map<std::string, Pose>& truth,
                   const Pose& noise = Pose()) {
  return {a, b, Compose(Compose(Invert(truth.at(a)), truth.at(b)), noise),
          Matrix6d::Identity()};
}

std::map<std::string, Pose> LoopTruth() {
  return {{"a", Pose()},
          {"b", Pose::FromYawTranslation(0.5, {10, 0, 0})},
          {"c", Pose::FromYawTranslation(1.5, {10, 10, 1})},
          {"d", Pose::FromYawTranslation(-0.7, {0, 10, 0})}};
}

PoseGraph PerturbedGraph(const std::map<std::string, Pose>& truth,
                         std::mt19937_64& rng) {
  PoseGraph g;
  for (const auto& [id, pose] : truth) {
    g.nodes[id] = id == "a" ? pose : Compose(oracle::RandomPose(rng, 1.0, 0.2), pose);
  }
  return g;
}

TEST(PoseGraph, ZeroNoiseChainAndLoop) {
  std::mt19937_64 rng(405);
  const auto truth = LoopTruth();
  PoseGraph chain = PerturbedGraph(truth, rng);
  chain.nodes.erase("d");
  chain.edges = {Edge("a", "b", truth), Edge("b", "c", truth)};
  const PoseGraphResult rc = OptimizePoseGraph(chain, "a");
  for (const auto& [id, pose] : rc.graph.nodes) {
    EXPECT_LT(PoseGap(pose, truth.at(id)), 1e-6) << id;
  }
  PoseGraph loop = PerturbedGraph(truth, rng);
  loop.edges = {Edge("a", "b", truth), Edge("b", "c", truth),
                Edge("c", "d", truth), Edge("d", "a", truth)};
  const PoseGraphResult rl = OptimizePoseGraph(loop, "a");
  EXPECT_TRUE(rl.converged);
  EXPECT_LT(rl.final_cost, 1e-12);
  for (const auto& [id, pose] : rl.graph.nodes) {
    EXPECT_LT(PoseGap(pose, truth.at(id)), 1e-6) << id;
  }
  for (std::size_t i = 1; i < rl.cost_trace.size(); ++i) {
    EXPECT_LE(rl.cost_trace[i], rl.cost_trace[i - 1]);
  }
}

TEST(PoseGraph, NoisyLoopMatchesIndependentMinimizer) {
  std::mt19937_64 rng(406);
  const auto truth = LoopTruth();
  PoseGraph g = PerturbedGraph(truth, rng);
  g.edges = {Edge("a", "b", truth, oracle::RandomPose(rng, 0.3, 0.05)),
             Edge("b", "c", truth, oracle::RandomPose(rng, 0.3, 0.05)),
             Edge("c", "d", truth, oracle::RandomPose(rng, 0.3, 0.05)),
             Edge("d", "a", truth, oracle::RandomPose(rng, 0.3, 0.05)),
             Edge("a", "c", truth, oracle::RandomPose(rng, 0.3, 0.05))};
  g.edges[4].information = Matrix6d::Identity() * 4.0;
  const PoseGraphResult r = OptimizePoseGraph(g, "a");
  const oracle::LmResult lm = oracle::LmPoseGraph(g, "a");
  EXPECT_GT(r.final_cost, 0.0);
  EXPECT_NEAR(r.final_cost, lm.cost, 1e-4 * lm.cost);
}

TEST(PoseGraph, DisconnectedThrows) {
  PoseGraph g;
  g.nodes = {{"a", Pose()}, {"b", Pose()}, {"c", Pose()}};
  g.edges = {{"a", "b", Pose(), Matrix6d::Identity()}};
  try {
    OptimizePoseGraph(g, "a");
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("c"), std::string::npos);
  }
}

TEST(PoseGraph, ValidateRejectsBadInformation) {
  PoseGraph g;
  g.nodes = {{"a", Pose()}, {"b", Pose()}};
  g.edges = {{"a", "b", Pose(), -Matrix6d::Identity()}};
  EXPECT_THROW(g.Validate(), InputError);
  g.edges[0] = {"a", "zz", Pose(), Matrix6d::Identity()};
  EXPECT_THROW(g.Validate(), InputError);
}

TEST(PoseGraph, FileRoundTrip) {
  std::mt19937_64 rng(407);
  const auto truth = LoopTruth();
  PoseGraph g = PerturbedGraph(truth, rng);
  g.edges = {Edge("a", "b", truth), Edge("c", "d", truth)};
  g.edges[1].information(0, 5) = g.edges[1].information(5, 0) = 0.25;
  const auto dir = testing::TempDir("graph_io");
  WritePoseGraphFile((dir / "g.txt").string(), g);
  const PoseGraph back = ReadPoseGraphFile((dir / "g.txt").string());
  ASSERT_EQ(back.edges.size(), 2u);
  EXPECT_EQ(back.edges[1].information, g.edges[1].information);
  EXPECT_LT(PoseGap(back.nodes.at("c"), g.nodes.at("c")), 1e-15);
}

TEST(AlignSequences, RecoversSequenceOffsets) {
  std::mt19937_64 rng(408);
  const PointCloud world = testing::StructuredScene(rng, 6000);
  std::map<std::string, Pose> drift = {
      {"s0", Pose()},
      {"s1", Pose::FromYawTranslation(0.03, {0.4, -0.2, 0.05})},
      {"s2", Pose::FromYawTranslation(-0.04, {-0.3, 0.3, 0.0})}};
  std::map<std::string, PointCloud> clouds;
  for (const auto& [id, d] : drift) clouds[id] = TransformPoints(d, world);
  AlignOptions options;
  options.voxel_size = 0.0;
  const AlignResult r = AlignSequences(clouds, options);
  ASSERT_EQ(r.pairs.size(), 3u);
  for (const auto& [id, d] : drift) {
    // corrected = C * drifted should equal the world frame.
    EXPECT_LT(PoseGap(Compose(r.corrections.at(id), d), Pose()), 1e-6) << id;
  }
}

}  // namespace
}  // namespace mapprior
