#ifndef MAPPRIOR_MAP_STORE_H_
#define MAPPRIOR_MAP_STORE_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mapprior/geometry.h"

namespace mapprior {

inline constexpr double kDefaultTileSize = 50.0;
inline constexpr double kDefaultDynamicMargin = 0.1;
inline constexpr int kDefaultOutlierNeighbors = 20;
inline constexpr double kDefaultOutlierStdRatio = 2.0;
inline constexpr double kDefaultMapPoolVoxel = 0.4;
inline constexpr double kDefaultTimeExclusionWindow = 3600.0;

// Oriented box. `length` runs along the yaw direction (box x), `width` is
// lateral (box y) and `height` vertical (box z).
struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double width = 0.0;
  double height = 0.0;
  double length = 0.0;
  double yaw = 0.0;

  // Inclusive containment test with every half extent grown by `margin`.
  bool Contains(const Point3& point, double margin) const;
};

// Points of `cloud` that lie inside none of `boxes`. Attributes are kept.
PointCloud RemoveDynamicPoints(const PointCloud& cloud,
                               std::span<const Box3D> boxes,
                               double margin = kDefaultDynamicMargin);

struct TileIndex {
  std::int32_t i = 0;
  std::int32_t j = 0;

  auto operator<=>(const TileIndex&) const = default;
};

struct TileIndexHash {
  std::size_t operator()(const TileIndex& t) const {
    return std::hash<std::uint64_t>()(
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.i)) << 32) |
        static_cast<std::uint32_t>(t.j));
  }
};

struct TimeSpan {
  double begin = 0.0;
  double end = 0.0;

  void Extend(double t);
};

// Global static map stored in half-open L x L tiles. Every tile cloud
// carries traversal ids and timestamps.
class TiledMap {
 public:
  explicit TiledMap(double tile_size = kDefaultTileSize);

  double tile_size() const { return tile_size_; }
  TileIndex TileOf(double x, double y) const;

  void AddPoint(const Point3& point, std::uint32_t traversal_id,
                double timestamp);
  // Registers a traversal or widens its span.
  void ExtendTraversal(std::uint32_t traversal_id, double timestamp);

  const std::unordered_map<TileIndex, PointCloud, TileIndexHash>& tiles()
      const {
    return tiles_;
  }
  const std::map<std::uint32_t, TimeSpan>& traversal_meta() const {
    return traversal_meta_;
  }
  std::vector<TileIndex> SortedTileIndices() const;
  std::size_t point_count() const;

 private:
  double tile_size_;
  std::unordered_map<TileIndex, PointCloud, TileIndexHash> tiles_;
  std::map<std::uint32_t, TimeSpan> traversal_meta_;
};

// One LiDAR sweep. `cloud` and `boxes` are in the sweep's ego frame,
// `ego_pose` is ego->global. Per-point timestamps in `cloud` take precedence
// over `timestamp`.
struct Sweep {
  Pose ego_pose;
  PointCloud cloud;
  std::vector<Box3D> boxes;
  std::uint32_t traversal_id = 0;
  double timestamp = 0.0;
};

struct BuildOptions {
  double tile_size = kDefaultTileSize;
  double dynamic_margin = kDefaultDynamicMargin;
};

struct RejectedSweep {
  std::size_t index = 0;
  std::string reason;
};

struct BuildResult {
  TiledMap map;
  std::vector<RejectedSweep> rejected;
  std::size_t points_kept = 0;
  std::size_t points_removed = 0;
};

// Removes dynamic points, moves each sweep to the global frame and tiles it.
// Sweeps with non-finite data are skipped and reported. Tile contents are
// ordered by (traversal_id, timestamp, sweep index, point index).
BuildResult BuildMap(std::span<const Sweep> sweeps,
                     const BuildOptions& options = {});

struct RetrievalQuery {
  Pose ego_pose;  // ego->global
  double range = 50.0;
  std::set<std::uint32_t> excluded_traversals;
  double time_exclusion_window = kDefaultTimeExclusionWindow;
  // The traversal being perceived. It is always excluded. Its time span
  // comes from `current_span` if set, else from the map's traversal_meta.
  std::optional<std::uint32_t> current_traversal;
  std::optional<TimeSpan> current_span;

  // Throws std::invalid_argument unless range > 0 and window >= 0.
  void Validate() const;
};

// Points with L-infinity horizontal distance <= range from the ego
// translation, minus excluded traversals and points whose timestamp lies
// within the exclusion window of the current traversal's span. Only tiles
// intersecting the query square are visited. Output is in the global frame,
// ordered by tile index and then by in-tile order.
PointCloud RetrievePatch(const TiledMap& map, const RetrievalQuery& query);

// Drops points whose mean distance to their k nearest neighbours (self
// excluded) exceeds mu + std_ratio * sigma over the whole cloud (sigma is the
// sample standard deviation). Throws InputError if size() <= k.
PointCloud StatisticalOutlierRemoval(const PointCloud& cloud, int k,
                                     double std_ratio);

// One point per occupied voxel at the mean of its members, ordered by voxel
// index (x, y, z). Provenance attributes are dropped.
PointCloud VoxelDownsample(const PointCloud& cloud, double voxel_size);

PointCloud ToEgoFrame(const PointCloud& patch_global, const Pose& ego_pose);

struct PatchOptions {
  int outlier_neighbors = kDefaultOutlierNeighbors;
  double outlier_std_ratio = kDefaultOutlierStdRatio;
  double pool_voxel = kDefaultMapPoolVoxel;
};

struct PatchResult {
  PointCloud patch_ego;
  std::size_t retrieved = 0;
  std::size_t after_outlier_removal = 0;
};

// The online retrieval pipeline in its fixed order: retrieve and merge,
// statistical outlier removal, voxel pooling, ego transform. Outlier removal
// is skipped when the merged patch has too few points for k-NN statistics.
PatchResult RetrieveEgoPatch(const TiledMap& map, const RetrievalQuery& query,
                             const PatchOptions& options = {});

}  // namespace mapprior

#endif  // MAPPRIOR_MAP_STORE_H_
