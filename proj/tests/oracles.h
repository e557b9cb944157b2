// Brute-force reference implementations used by the unit and acceptance
// tests. Each one follows the definition directly and ignores speed.
#ifndef MAPPRIOR_TESTS_ORACLES_H_
#define MAPPRIOR_TESTS_ORACLES_H_

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "mapprior/geometry.h"
#include "mapprior/map_store.h"
#include "mapprior/pose_align.h"
#include "mapprior/pv_encoder.h"

namespace mapprior::oracle {

// Per pixel: every projected point is collected, then the minimum depth
// (earliest index on ties) is chosen.
struct ZBuffer {
  Image2D<double> depth;
  Image2D<std::uint8_t> mask;
  Image2D<std::int64_t> winner;  // -1 where empty
};
ZBuffer BruteZBuffer(const CameraModel& camera, const PointCloud& cloud);

// O(N^2) nearest valid pixel with (v, u) tie order.
struct Spread {
  Image2D<float> d_near;
  Image2D<float> delta_norm;
};
Spread BruteSpread(const Image2D<float>& d_norm,
                   const Image2D<std::uint8_t>& mask, int radius);

// Flat list of map points with provenance.
struct MapPoint {
  Point3 p;
  std::uint32_t traversal = 0;
  double time = 0.0;

  auto key() const { return std::tuple(p.x(), p.y(), p.z(), traversal, time); }
};
using PointKey = std::tuple<double, double, double, std::uint32_t, double>;

// Linear scan of the retrieval predicate.
std::multiset<PointKey> LinearScanRetrieve(
    const std::vector<MapPoint>& points,
    const std::map<std::uint32_t, TimeSpan>& spans,
    const RetrievalQuery& query);
std::multiset<PointKey> Keys(const PointCloud& cloud);

// Group-by voxel index with floor(x / v); mean and count per voxel.
struct VoxelStat {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  std::size_t count = 0;
};
std::map<std::array<std::int64_t, 3>, VoxelStat> GroupByMean(
    const std::vector<Point3>& points, double voxel);

// O(N^2) k-NN mean distance (self excluded) against mu + ratio * sigma with
// the sample standard deviation. Returns the kept indices.
std::vector<std::size_t> BruteOutlierKeep(const std::vector<Point3>& points,
                                          int k, double std_ratio);

// Containment via an explicit transform into the box frame.
bool BoxContains(const Box3D& box, const Point3& p, double margin);

// Independent minimizer of the pose-graph cost using Eigen's
// Levenberg-Marquardt over tangent offsets of every free node.
struct LmResult {
  std::map<std::string, Pose> nodes;
  double cost = 0.0;
};
LmResult LmPoseGraph(const PoseGraph& graph, const std::string& fixed);

// Random helpers.
Pose RandomPose(std::mt19937_64& rng, double max_translation,
                double max_angle);
CameraModel RandomCamera(std::mt19937_64& rng, int width, int height);

}  // namespace mapprior::oracle

#endif  // MAPPRIOR_TESTS_ORACLES_H_
