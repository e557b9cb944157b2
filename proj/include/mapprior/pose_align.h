#ifndef MAPPRIOR_POSE_ALIGN_H_
#define MAPPRIOR_POSE_ALIGN_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mapprior/geometry.h"

namespace mapprior {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

// SE(3) exponential and logarithm. Tangent vectors are ordered
// (rotation, translation): xi = (omega, rho).
Pose ExpSE3(const Vector6d& xi);
Vector6d LogSE3(const Pose& pose);

// ---------------------------------------------------------------------------
// Point-to-point ICP.

struct IcpOptions {
  int max_iterations = 100;
  // Converged when translation change + rotation change (rad) drops below
  // this.
  double tolerance = 1e-10;
  double max_correspondence_distance = 2.0;
  // The correspondence gate shrinks by shrink_factor at every plateau until
  // it reaches this value.
  double min_correspondence_distance = 0.25;
  double shrink_factor = 0.5;
  // Threads for the correspondence search; 0 means WorkerCount().
  int workers = 0;
};

struct IcpResult {
  Pose relative;  // maps source into target
  double rmse = 0.0;
  double inlier_fraction = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Throws NumericalError("no overlap under initial guess") when no source
// point has a target neighbour within the initial gate.
IcpResult IcpRegister(const PointCloud& source, const PointCloud& target,
                      const Pose& initial, const IcpOptions& options = {});

// Closed-form least-squares rigid transform mapping `from[i]` onto `to[i]`.
Pose FitRigidTransform(const std::vector<Eigen::Vector3d>& from,
                       const std::vector<Eigen::Vector3d>& to);

// ---------------------------------------------------------------------------
// Pose graph.

struct PoseGraphEdge {
  std::string from;
  std::string to;
  // Expected value of T_from^-1 * T_to.
  Pose measured;
  Matrix6d information = Matrix6d::Identity();
};

struct PoseGraph {
  std::map<std::string, Pose> nodes;
  std::vector<PoseGraphEdge> edges;

  // Throws InputError on unknown edge endpoints or an information matrix
  // that is not symmetric positive definite.
  void Validate() const;
};

// log(Z^-1 * T_from^-1 * T_to).
Vector6d EdgeResidual(const PoseGraphEdge& edge, const Pose& from,
                      const Pose& to);
// Sum over edges of r^T * information * r.
double PoseGraphCost(const PoseGraph& graph);

struct PoseGraphOptions {
  int max_iterations = 100;
  double function_tolerance = 1e-14;
  double step_tolerance = 1e-12;
  double damping_increase = 10.0;
  double damping_decrease = 10.0;
  int max_damping_attempts = 40;
};

struct PoseGraphResult {
  PoseGraph graph;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  // "converged" or a warning such as "max_iterations".
  std::string status;
  // Cost after every accepted step, starting with the initial cost.
  std::vector<double> cost_trace;
};

// Gauss-Newton with a left tangent update T <- exp(delta) * T; a step that
// raises the cost is retried with multiplicative Levenberg damping. `fixed`
// is held constant. Throws NumericalError listing the components when the
// graph is disconnected.
PoseGraphResult OptimizePoseGraph(const PoseGraph& graph,
                                  const std::string& fixed,
                                  const PoseGraphOptions& options = {});

// Graph file: text records
//   NODE id qx qy qz qw tx ty tz
//   EDGE a b qx qy qz qw tx ty tz w11 w12 .. w16 w22 .. w66
// (information upper triangle, row-major).
PoseGraph ReadPoseGraphFile(const std::string& path);
void WritePoseGraphFile(const std::string& path, const PoseGraph& graph);

// ---------------------------------------------------------------------------
// Cross-sequence alignment.

struct AlignOptions {
  IcpOptions icp;
  PoseGraphOptions graph;
  // Pairs are registered when their tile footprints share a tile.
  double tile_size = 50.0;
  // Clouds are voxel-pooled before registration; 0 disables pooling.
  double voxel_size = 0.4;
  // Anchor sequence; the lexicographically first id when unset.
  std::optional<std::string> fixed;
};

struct PairRegistration {
  std::string target;
  std::string source;
  bool registered = false;
  std::string message;
  IcpResult icp;
};

struct AlignResult {
  // Correction C_s per sequence: corrected = C_s * original global frame.
  std::map<std::string, Pose> corrections;
  std::vector<PairRegistration> pairs;
  PoseGraphResult optimization;
};

// `clouds` are per-sequence clouds in the (misaligned) global frame. Each
// overlapping pair (a, b) is registered b -> a and becomes an edge with
// measurement C_a^-1 C_b and information identity * inlier fraction.
AlignResult AlignSequences(const std::map<std::string, PointCloud>& clouds,
                           const AlignOptions& options = {});

}  // namespace mapprior

#endif  // MAPPRIOR_POSE_ALIGN_H_
