#include "mapprior/pose_align.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "mapprior/errors.h"
#include "mapprior/grid_index.h"
#include "mapprior/kdtree.h"
#include "mapprior/map_store.h"
#include "mapprior/parallel.h"

namespace mapprior {

Pose FitRigidTransform(const std::vector<Eigen::Vector3d>& from,
                       const std::vector<Eigen::Vector3d>& to) {
  if (from.size() != to.size() || from.size() < 3) {
    throw std::invalid_argument("rigid fit needs >= 3 matched pairs");
  }
  const double n = static_cast<double>(from.size());
  Eigen::Vector3d from_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d to_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    from_mean += from[i];
    to_mean += to[i];
  }
  from_mean /= n;
  to_mean /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    cov += (to[i] - to_mean) * (from[i] - from_mean).transpose();
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  const Eigen::Matrix3d rotation =
      svd.matrixU() * d * svd.matrixV().transpose();
  return Pose::FromMatrix(rotation, to_mean - rotation * from_mean);
}

namespace {

struct Correspondences {
  std::vector<Eigen::Vector3d> source;
  std::vector<Eigen::Vector3d> target;
  double squared_error = 0.0;
};

Correspondences Match(const PointCloud& source, const PointCloud& target,
                      const KdTree& tree, const Pose& pose, double gate,
                      int workers) {
  const Eigen::Matrix3d rotation = pose.RotationMatrix();
  std::vector<Neighbor> nearest(source.size());
  ParallelFor(source.size(), [&](std::size_t i) {
    nearest[i] = tree.Nearest(
        rotation * source.positions[i] + pose.translation(), gate * gate);
  }, workers > 0 ? workers : WorkerCount());
  Correspondences c;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (nearest[i].index == KdTree::kNoNeighbor) continue;
    c.source.push_back(source.positions[i]);
    c.target.push_back(target.positions[nearest[i].index]);
    c.squared_error += nearest[i].squared_distance;
  }
  return c;
}

double PoseChange(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm() +
         a.rotation().angularDistance(b.rotation());
}

}  // namespace

IcpResult IcpRegister(const PointCloud& source, const PointCloud& target,
                      const Pose& initial, const IcpOptions& options) {
  if (source.empty() || target.empty()) {
    throw std::invalid_argument("ICP needs non-empty clouds");
  }
  if (!(options.max_correspondence_distance > 0.0) ||
      !(options.min_correspondence_distance > 0.0)) {
    throw std::invalid_argument("ICP correspondence distances must be > 0");
  }
  const KdTree tree(target.positions);
  IcpResult result;
  result.relative = initial;
  double gate = options.max_correspondence_distance;
  const double min_gate =
      std::min(options.min_correspondence_distance, gate);

  Correspondences matches = Match(source, target, tree, initial, gate, options.workers);
  if (matches.source.empty()) {
    throw NumericalError("no overlap under initial guess");
  }
  while (result.iterations < options.max_iterations) {
    if (matches.source.size() < 3) break;
    const Pose next = FitRigidTransform(matches.source, matches.target);
    const double change = PoseChange(next, result.relative);
    result.relative = next;
    ++result.iterations;
    if (change < options.tolerance) {
      if (gate <= min_gate) {
        result.converged = true;
        break;
      }
      gate = std::max(min_gate, gate * options.shrink_factor);
    }
    matches = Match(source, target, tree, result.relative, gate,
                    options.workers);
  }
  matches = Match(source, target, tree, result.relative, gate,
                    options.workers);
  result.inlier_fraction = static_cast<double>(matches.source.size()) /
                           static_cast<double>(source.size());
  result.rmse = matches.source.empty()
                    ? 0.0
                    : std::sqrt(matches.squared_error /
                                static_cast<double>(matches.source.size()));
  return result;
}

// ---------------------------------------------------------------------------

void PoseGraph::Validate() const {
  for (const PoseGraphEdge& e : edges) {
    if (!nodes.count(e.from) || !nodes.count(e.to)) {
      throw InputError(fmt::format("edge {} -> {} references a missing node",
                                   e.from, e.to));
    }
    if (!e.information.isApprox(e.information.transpose(), 1e-12) ||
        e.information.llt().info() != Eigen::Success) {
      throw InputError(fmt::format(
          "edge {} -> {}: information must be symmetric positive definite",
          e.from, e.to));
    }
  }
}

Vector6d EdgeResidual(const PoseGraphEdge& edge, const Pose& from,
                      const Pose& to) {
  return LogSE3(
      Compose(Invert(edge.measured), Compose(Invert(from), to)));
}

double PoseGraphCost(const PoseGraph& graph) {
  double cost = 0.0;
  for (const PoseGraphEdge& e : graph.edges) {
    const Vector6d r = EdgeResidual(e, graph.nodes.at(e.from),
                                    graph.nodes.at(e.to));
    cost += r.dot(e.information * r);
  }
  return cost;
}

namespace {

std::vector<std::vector<std::string>> Components(const PoseGraph& graph) {
  std::map<std::string, std::string> parent;
  for (const auto& [id, pose] : graph.nodes) parent[id] = id;
  auto find = [&](std::string id) {
    while (parent[id] != id) id = parent[id] = parent[parent[id]];
    return id;
  };
  for (const PoseGraphEdge& e : graph.edges) {
    const std::string a = find(e.from);
    const std::string b = find(e.to);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [id, pose] : graph.nodes) groups[find(id)].push_back(id);
  std::vector<std::vector<std::string>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

// d r / d delta for T <- exp(delta) T, central differences.
Matrix6d NumericJacobian(const PoseGraphEdge& edge, const Pose& from,
                         const Pose& to, bool wrt_from) {
  constexpr double kStep = 1e-6;
  Matrix6d jacobian;
  for (int k = 0; k < 6; ++k) {
    Vector6d delta = Vector6d::Zero();
    delta[k] = kStep;
    const Pose plus = Compose(ExpSE3(delta), wrt_from ? from : to);
    const Pose minus = Compose(ExpSE3(-delta), wrt_from ? from : to);
    const Vector6d r_plus = wrt_from ? EdgeResidual(edge, plus, to)
                                     : EdgeResidual(edge, from, plus);
    const Vector6d r_minus = wrt_from ? EdgeResidual(edge, minus, to)
                                      : EdgeResidual(edge, from, minus);
    jacobian.col(k) = (r_plus - r_minus) / (2.0 * kStep);
  }
  return jacobian;
}

}  // namespace

PoseGraphResult OptimizePoseGraph(const PoseGraph& graph,
                                  const std::string& fixed,
                                  const PoseGraphOptions& options) {
  graph.Validate();
  if (!graph.nodes.count(fixed)) {
    throw std::invalid_argument("fixed node '" + fixed + "' is not in the graph");
  }
  const auto components = Components(graph);
  if (components.size() > 1) {
    std::string listing;
    for (const auto& members : components) {
      listing += " {";
      for (std::size_t i = 0; i < members.size(); ++i) {
        listing += (i ? ", " : "") + members[i];
      }
      listing += "}";
    }
    throw NumericalError("pose graph is disconnected; components:" + listing);
  }

  PoseGraphResult result;
  result.graph = graph;
  result.initial_cost = PoseGraphCost(graph);
  result.final_cost = result.initial_cost;
  result.cost_trace.push_back(result.initial_cost);

  std::map<std::string, int> slot;
  for (const auto& [id, pose] : graph.nodes) {
    if (id != fixed) slot[id] = static_cast<int>(slot.size());
  }
  const int dim = 6 * static_cast<int>(slot.size());
  if (dim == 0 || graph.edges.empty()) {
    result.converged = true;
    result.status = "converged";
    return result;
  }

  double cost = result.initial_cost;
  double damping = 0.0;
  while (result.iterations < options.max_iterations) {
    Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(dim);
    for (const PoseGraphEdge& e : result.graph.edges) {
      const Pose& a = result.graph.nodes.at(e.from);
      const Pose& b = result.graph.nodes.at(e.to);
      const Vector6d r = EdgeResidual(e, a, b);
      const auto ia = slot.find(e.from);
      const auto ib = slot.find(e.to);
      Matrix6d ja = Matrix6d::Zero();
      Matrix6d jb = Matrix6d::Zero();
      if (ia != slot.end()) ja = NumericJacobian(e, a, b, true);
      if (ib != slot.end()) jb = NumericJacobian(e, a, b, false);
      const std::pair<decltype(ia), const Matrix6d*> blocks[2] = {{ia, &ja},
                                                                  {ib, &jb}};
      for (const auto& [it_row, j_row] : blocks) {
        if (it_row == slot.end()) continue;
        const int row = 6 * it_row->second;
        gradient.segment<6>(row) += j_row->transpose() * e.information * r;
        for (const auto& [it_col, j_col] : blocks) {
          if (it_col == slot.end()) continue;
          hessian.block<6, 6>(row, 6 * it_col->second) +=
              j_row->transpose() * e.information * *j_col;
        }
      }
    }

    bool accepted = false;
    double step_norm = 0.0;
    double new_cost = cost;
    PoseGraph trial;
    for (int attempt = 0; attempt < options.max_damping_attempts; ++attempt) {
      Eigen::MatrixXd system = hessian;
      system.diagonal().array() +=
          damping * (hessian.diagonal().array() + 1e-12);
      const Eigen::VectorXd step = system.ldlt().solve(-gradient);
      step_norm = step.norm();
      trial = result.graph;
      for (const auto& [id, index] : slot) {
        trial.nodes[id] = Compose(ExpSE3(step.segment<6>(6 * index)),
                                  trial.nodes[id]);
      }
      new_cost = PoseGraphCost(trial);
      if (std::isfinite(new_cost) && new_cost <= cost) {
        accepted = true;
        break;
      }
      damping = damping == 0.0 ? 1e-6 : damping * options.damping_increase;
    }
    ++result.iterations;
    if (!accepted) {
      result.converged = true;
      result.status = "converged";
      break;
    }
    const double decrease = cost - new_cost;
    result.graph = std::move(trial);
    cost = new_cost;
    result.cost_trace.push_back(cost);
    damping /= options.damping_decrease;
    if (damping < 1e-12) damping = 0.0;
    if (cost == 0.0 || decrease <= options.function_tolerance * cost ||
        step_norm < options.step_tolerance) {
      result.converged = true;
      result.status = "converged";
      break;
    }
  }
  result.final_cost = cost;
  if (!result.converged) result.status = "max_iterations";
  return result;
}

PoseGraph ReadPoseGraphFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open graph file: " + path);
  PoseGraph graph;
  std::string line;
  int line_number = 0;
  auto read_pose = [&](std::istream& fields) {
    double v[7];
    for (double& x : v) {
      if (!(fields >> x)) {
        throw InputError(fmt::format("{}:{}: malformed pose", path, line_number));
      }
    }
    return Pose(Eigen::Quaterniond(v[3], v[0], v[1], v[2]),
                Eigen::Vector3d(v[4], v[5], v[6]));
  };
  while (std::getline(in, line)) {
    ++line_number;
    std::istringstream fields(line);
    std::string tag;
    if (!(fields >> tag) || tag[0] == '#') continue;
    if (tag == "NODE") {
      std::string id;
      if (!(fields >> id)) {
        throw InputError(fmt::format("{}:{}: missing node id", path, line_number));
      }
      graph.nodes[id] = read_pose(fields);
    } else if (tag == "EDGE") {
      PoseGraphEdge edge;
      if (!(fields >> edge.from >> edge.to)) {
        throw InputError(fmt::format("{}:{}: missing edge ids", path, line_number));
      }
      edge.measured = read_pose(fields);
      for (int r = 0; r < 6; ++r) {
        for (int c = r; c < 6; ++c) {
          if (!(fields >> edge.information(r, c))) {
            throw InputError(fmt::format(
                "{}:{}: expected 21 information entries", path, line_number));
          }
          edge.information(c, r) = edge.information(r, c);
        }
      }
      graph.edges.push_back(std::move(edge));
    } else {
      throw InputError(
          fmt::format("{}:{}: unknown record '{}'", path, line_number, tag));
    }
  }
  graph.Validate();
  return graph;
}

void WritePoseGraphFile(const std::string& path, const PoseGraph& graph) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write graph file: " + path);
  for (const auto& [id, pose] : graph.nodes) {
    out << fmt::format("NODE {} {}\n", id, FormatPose(pose));
  }
  for (const PoseGraphEdge& e : graph.edges) {
    out << fmt::format("EDGE {} {} {}", e.from, e.to, FormatPose(e.measured));
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) out << fmt::format(" {}", e.information(r, c));
    }
    out << '\n';
  }
  if (!out) throw InputError("failed writing graph file: " + path);
}

// ---------------------------------------------------------------------------

AlignResult AlignSequences(const std::map<std::string, PointCloud>& clouds,
                           const AlignOptions& options) {
  AlignResult result;
  if (clouds.empty()) return result;

  std::vector<std::string> ids;
  std::vector<PointCloud> pooled;
  std::vector<std::set<std::pair<std::int64_t, std::int64_t>>> footprints;
  for (const auto& [id, cloud] : clouds) {
    ids.push_back(id);
    pooled.push_back(options.voxel_size > 0.0
                         ? VoxelDownsample(cloud, options.voxel_size)
                         : cloud);
    auto& footprint = footprints.emplace_back();
    for (const Point3& p : cloud.positions) {
      footprint.emplace(CellIndex(p.x(), options.tile_size),
                        CellIndex(p.y(), options.tile_size));
    }
  }

  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      const bool overlap = std::any_of(
          footprints[a].begin(), footprints[a].end(),
          [&](const auto& tile) { return footprints[b].count(tile) > 0; });
      if (overlap) result.pairs.push_back({ids[a], ids[b], false, "", {}});
    }
  }

  // Pairs run concurrently; each registration then searches single-threaded.
  AlignOptions local = options;
  const int pair_workers = result.pairs.size() > 1 ? WorkerCount() : 1;
  if (pair_workers > 1) local.icp.workers = 1;
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < ids.size(); ++i) position[ids[i]] = i;
  ParallelFor(result.pairs.size(), [&](std::size_t k) {
    PairRegistration& pair = result.pairs[k];
    const PointCloud& target = pooled[position[pair.target]];
    const PointCloud& source = pooled[position[pair.source]];
    if (target.empty() || source.empty()) {
      pair.message = "empty cloud";
      return;
    }
    try {
      pair.icp = IcpRegister(source, target, Pose::Identity(), local.icp);
      pair.registered = pair.icp.inlier_fraction > 0.0;
      if (!pair.registered) pair.message = "no inliers at convergence";
    } catch (const NumericalError& e) {
      pair.message = e.what();
    }
  }, pair_workers);

  PoseGraph graph;
  for (const std::string& id : ids) graph.nodes[id] = Pose::Identity();
  for (const PairRegistration& pair : result.pairs) {
    if (!pair.registered) continue;
    graph.edges.push_back({pair.target, pair.source, pair.icp.relative,
                           Matrix6d::Identity() * pair.icp.inlier_fraction});
  }
  const std::string fixed = options.fixed.value_or(ids.front());
  result.optimization = OptimizePoseGraph(graph, fixed, options.graph);
  result.corrections = result.optimization.graph.nodes;
  return result;
}

}  // namespace mapprior
