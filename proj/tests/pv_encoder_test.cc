#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mapprior/pv_encoder.h"
#include "oracles.h"
#include "scenes.h"

namespace mapprior {
namespace {

CameraModel SmallCamera() {
  CameraModel cam;
  cam.id = "cam";
  cam.fx = cam.fy = 50;
  cam.cx = 20;
  cam.cy = 15;
  cam.width = 40;
  cam.height = 30;
  // Ego x forward maps to camera z.
  cam.extrinsic = Pose::FromMatrix(
      (Eigen::Matrix3d() << 0, -1, 0, 0, 0, -1, 1, 0, 0).finished(),
      Eigen::Vector3d::Zero());
  return cam;
}

TEST(Rasterize, MatchesBruteForceZBuffer) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const CameraModel cam = oracle::RandomCamera(rng, 64, 48);
    const PointCloud cloud = testing::RandomViewCloud(rng, cam, 3000);
    const DepthRaster r = Rasterize(cam, cloud, 61.0, 50.0);
    const oracle::ZBuffer z = oracle::BruteZBuffer(cam, cloud);
    EXPECT_EQ(r.depth.data, z.depth.data);
    EXPECT_EQ(r.mask.data, z.mask.data);
    for (std::size_t p = 0; p < z.winner.data.size(); ++p) {
      if (z.winner.data[p] < 0) continue;
      const Point3& w = cloud.positions[z.winner.data[p]];
      EXPECT_EQ(r.xyz_norm[0].data[p],
                static_cast<float>(std::clamp(w.x() / 50.0, -1.0, 1.0)));
    }
  }
}

TEST(Rasterize, ClosestWinsAndTiesKeepFirst) {
  const CameraModel cam = SmallCamera();
  PointCloud c;
  c.positions = {{10, 0, 0}, {5, 0, 0}, {5, 0, 0.0}, {100, 0, 0}};
  const DepthRaster r = Rasterize(cam, c, 61.0, 50.0);
  EXPECT_EQ(r.depth.at(20, 15), 5.0);
  EXPECT_EQ(r.mask.at(20, 15), 1);
  EXPECT_FLOAT_EQ(r.d_norm.at(20, 15), 5.0f / 61.0f);
  EXPECT_FLOAT_EQ(r.xyz_norm[0].at(20, 15), 0.1f);
  // Far point alone clips d_norm at 1 and x at 1.
  PointCloud far;
  far.positions = {{100, 0, 0}};
  const DepthRaster rf = Rasterize(cam, far, 61.0, 50.0);
  EXPECT_EQ(rf.d_norm.at(20, 15), 1.0f);
  EXPECT_EQ(rf.xyz_norm[0].at(20, 15), 1.0f);
  EXPECT_THROW(Rasterize(cam, far, 0.0, 50.0), std::invalid_argument);
}

TEST(Rasterize, EmptyPatch) {
  const DepthRaster r = Rasterize(SmallCamera(), PointCloud{}, 61.0, 50.0);
  for (auto m : r.mask.data) EXPECT_EQ(m, 0);
}

TEST(DepthEmbedding, FrequenciesAndValues) {
  EXPECT_DOUBLE_EQ(EmbeddingFrequency(0, 16), M_PI);
  EXPECT_NEAR(EmbeddingFrequency(7, 16), 1024 * M_PI, 1e-9);
  EXPECT_DOUBLE_EQ(EmbeddingFrequency(0, 2), M_PI);
  for (int k = 1; k < 8; ++k) {
    EXPECT_NEAR(EmbeddingFrequency(k, 16) / EmbeddingFrequency(k - 1, 16),
                std::pow(1024.0, 1.0 / 7.0), 1e-12);
  }
  const auto e = DepthEmbedding(0.3, 16);
  ASSERT_EQ(e.size(), 16u);
  for (int k = 0; k < 8; ++k) {
    EXPECT_NEAR(e[2 * k], std::sin(EmbeddingFrequency(k, 16) * 0.3), 1e-15);
    EXPECT_NEAR(e[2 * k + 1], std::cos(EmbeddingFrequency(k, 16) * 0.3), 1e-15);
  }
  EXPECT_EQ(DepthEmbedding(1.7, 4), DepthEmbedding(1.0, 4));
  EXPECT_THROW(DepthEmbedding(0.5, 3), std::invalid_argument);
  EXPECT_THROW(DepthEmbedding(0.5, 0), std::invalid_argument);
}

TEST(NearestValidSpread, MatchesBruteForce) {
  std::mt19937_64 rng(111);
  for (int trial = 0; trial < 10; ++trial) {
    Image2D<float> d;
    Image2D<std::uint8_t> m;
    testing::RandomSparseDepth(rng, 37, 29, trial < 5 ? 0.01 : 0.2, d, m);
    for (int r : {1, 4, 8, 24}) {
      const SpreadResult s = NearestValidSpread(d, m, r);
      const oracle::Spread o = oracle::BruteSpread(d, m, r);
      EXPECT_EQ(s.d_near.data, o.d_near.data) << "trial " << trial << " r " << r;
      EXPECT_EQ(s.delta_norm.data, o.delta_norm.data);
    }
  }
}

TEST(NearestValidSpread, TieGoesToSmallestRowThenColumn) {
  Image2D<float> d(5, 5, 0.0f);
  Image2D<std::uint8_t> m(5, 5, 0);
  // Four valid pixels at distance 1 from (2, 2).
  for (auto [u, v, val] : {std::tuple{2, 1, 0.1f}, {1, 2, 0.2f}, {3, 2, 0.3f},
                           {2, 3, 0.4f}}) {
    m.at(u, v) = 1;
    d.at(u, v) = val;
  }
  const SpreadResult s = NearestValidSpread(d, m, 2);
  EXPECT_EQ(s.d_near.at(2, 2), 0.1f);
  EXPECT_EQ(s.delta_norm.at(2, 2), 0.5f);
  EXPECT_EQ(s.delta_norm.at(2, 1), 0.0f);
}

TEST(NearestValidSpread, NoValidPixels) {
  Image2D<float> d(8, 8, 0.0f);
  Image2D<std::uint8_t> m(8, 8, 0);
  const SpreadResult s = NearestValidSpread(d, m, 3);
  for (float x : s.d_near.data) EXPECT_EQ(x, 0.0f);
  for (float x : s.delta_norm.data) EXPECT_EQ(x, 1.0f);
}

TEST(PVMapTensor, ChannelLayout) {
  const CameraModel cam = SmallCamera();
  PointCloud c;
  c.positions = {{6.1, 0, 0}};
  PVParams params;
  params.embedding_dim = 4;
  params.spread_radius = 2;
  const PVMapTensor t = AssemblePVTensor(cam, c, params);
  ASSERT_EQ(t.channels(), 11);
  EXPECT_EQ(PVChannelNames(4).size(), 11u);
  EXPECT_EQ(PVChannelNames(4)[t.NearDepthChannel()], "d_near");
  EXPECT_EQ(PVChannelNames(4)[t.DistanceChannel()], "delta_norm");
  EXPECT_EQ(t.at(15, 20, PVMapTensor::kMaskChannel), 1.0f);
  const float d = t.at(15, 20, 0);
  EXPECT_FLOAT_EQ(d, static_cast<float>(6.1 / 61.0));
  const auto e = DepthEmbedding(d, 4);
  EXPECT_EQ(t.at(15, 20, t.EmbeddingChannel(1)), static_cast<float>(e[1]));
  EXPECT_EQ(t.at(15, 20, t.XyzChannel(0)), static_cast<float>(6.1 / 50.0));
  EXPECT_EQ(t.at(15, 20, t.NearDepthChannel()), d);
  EXPECT_EQ(t.at(15, 20, t.DistanceChannel()), 0.0f);
  // One pixel away: spread copies the depth, everything else stays empty.
  EXPECT_EQ(t.at(15, 21, 1), 0.0f);
  EXPECT_EQ(t.at(15, 21, t.NearDepthChannel()), d);
  EXPECT_EQ(t.at(15, 21, t.DistanceChannel()), 0.5f);
  EXPECT_EQ(t.at(0, 0, t.DistanceChannel()), 1.0f);
}

TEST(PVMapTensor, FileRoundTrip) {
  std::mt19937_64 rng(121);
  const CameraModel cam = SmallCamera();
  const PointCloud cloud = testing::RandomViewCloud(rng, cam, 500);
  const PVMapTensor t = AssemblePVTensor(cam, cloud, PVParams{});
  const auto dir = testing::TempDir("pv_io");
  const std::string path = (dir / "t.mptensor").string();
  WritePVTensorFile(path, t, "{\"seed\":1}");
  const PVMapTensor back = ReadPVTensorFile(path);
  EXPECT_EQ(back.data, t.data);
  EXPECT_EQ(back.camera_id, "cam");
  EXPECT_EQ(back.channels(), t.channels());
}

TEST(AssemblePVTensors, ParallelEqualsSequential) {
  std::mt19937_64 rng(131);
  std::vector<CameraModel> cams;
  for (int i = 0; i < 4; ++i) cams.push_back(oracle::RandomCamera(rng, 50, 40));
  const PointCloud cloud = testing::RandomViewCloud(rng, cams[0], 2000);
  const auto all = AssemblePVTensors(cams, cloud, PVParams{});
  for (std::size_t i = 0; i < cams.size(); ++i) {
    EXPECT_EQ(all[i].data, AssemblePVTensor(cams[i], cloud, PVParams{}).data);
  }
}

}  // namespace
}  // namespace mapprior
