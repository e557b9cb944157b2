#include "mapprior/map_store.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "mapprior/errors.h"
#include "mapprior/grid_index.h"
#include "mapprior/kdtree.h"
#include "mapprior/parallel.h"

namespace mapprior {

bool Box3D::Contains(const Point3& point, double margin) const {
  const Eigen::Vector3d d = point - center;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double x = c * d.x() + s * d.y();
  const double y = -s * d.x() + c * d.y();
  return std::abs(x) <= 0.5 * length + margin &&
         std::abs(y) <= 0.5 * width + margin &&
         std::abs(d.z()) <= 0.5 * height + margin;
}

PointCloud RemoveDynamicPoints(const PointCloud& cloud,
                               std::span<const Box3D> boxes, double margin) {
  if (boxes.empty()) return cloud;
  PointCloud kept;
  if (cloud.traversal_ids) kept.traversal_ids.emplace();
  if (cloud.timestamps) kept.timestamps.emplace();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const bool dynamic = std::any_of(
        boxes.begin(), boxes.end(),
        [&](const Box3D& b) { return b.Contains(cloud.positions[i], margin); });
    if (!dynamic) kept.AppendFrom(cloud, i);
  }
  return kept;
}

void TimeSpan::Extend(double t) {
  begin = std::min(begin, t);
  end = std::max(end, t);
}

TiledMap::TiledMap(double tile_size) : tile_size_(tile_size) {
  if (!(tile_size > 0.0) || !std::isfinite(tile_size)) {
    throw std::invalid_argument("tile size must be positive and finite");
  }
}

TileIndex TiledMap::TileOf(double x, double y) const {
  return {static_cast<std::int32_t>(CellIndex(x, tile_size_)),
          static_cast<std::int32_t>(CellIndex(y, tile_size_))};
}

void TiledMap::AddPoint(const Point3& point, std::uint32_t traversal_id,
                        double timestamp) {
  PointCloud& tile = tiles_[TileOf(point.x(), point.y())];
  if (!tile.traversal_ids) {
    tile.traversal_ids.emplace();
    tile.timestamps.emplace();
  }
  tile.positions.push_back(point);
  tile.traversal_ids->push_back(traversal_id);
  tile.timestamps->push_back(timestamp);
  ExtendTraversal(traversal_id, timestamp);
}

void TiledMap::ExtendTraversal(std::uint32_t traversal_id, double timestamp) {
  auto [it, inserted] =
      traversal_meta_.try_emplace(traversal_id, TimeSpan{timestamp, timestamp});
  if (!inserted) it->second.Extend(timestamp);
}

std::vector<TileIndex> TiledMap::SortedTileIndices() const {
  std::vector<TileIndex> keys;
  keys.reserve(tiles_.size());
  for (const auto& [key, cloud] : tiles_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::size_t TiledMap::point_count() const {
  std::size_t total = 0;
  for (const auto& [key, cloud] : tiles_) total += cloud.size();
  return total;
}

namespace {

struct StaticPoint {
  Point3 position;
  std::uint32_t traversal_id;
  double timestamp;
  std::size_t sweep;
  std::size_t index;

  auto Key() const { return std::tie(traversal_id, timestamp, sweep, index); }
};

struct SweepOutcome {
  std::vector<StaticPoint> points;
  std::size_t removed = 0;
  std::optional<std::string> error;
};

SweepOutcome ProcessSweep(const Sweep& sweep, std::size_t sweep_index,
                          double margin) {
  SweepOutcome outcome;
  try {
    sweep.cloud.Validate();
  } catch (const InputError& e) {
    outcome.error = e.what();
    return outcome;
  }
  if (!std::isfinite(sweep.timestamp)) {
    outcome.error = "non-finite sweep timestamp";
    return outcome;
  }
  if (sweep.cloud.timestamps) {
    for (double t : *sweep.cloud.timestamps) {
      if (!std::isfinite(t)) {
        outcome.error = "non-finite point timestamp";
        return outcome;
      }
    }
  }
  const PointCloud& cloud = sweep.cloud;
  const Eigen::Matrix3d rotation = sweep.ego_pose.RotationMatrix();
  outcome.points.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.positions[i];
    const bool dynamic =
        std::any_of(sweep.boxes.begin(), sweep.boxes.end(),
                    [&](const Box3D& b) { return b.Contains(p, margin); });
    if (dynamic) {
      ++outcome.removed;
      continue;
    }
    outcome.points.push_back(
        {rotation * p + sweep.ego_pose.translation(), sweep.traversal_id,
         cloud.timestamps ? (*cloud.timestamps)[i] : sweep.timestamp,
         sweep_index, i});
  }
  return outcome;
}

}  // namespace

BuildResult BuildMap(std::span<const Sweep> sweeps,
                     const BuildOptions& options) {
  BuildResult result{TiledMap(options.tile_size), {}, 0, 0};
  std::vector<SweepOutcome> outcomes(sweeps.size());
  ParallelFor(sweeps.size(), [&](std::size_t s) {
    outcomes[s] = ProcessSweep(sweeps[s], s, options.dynamic_margin);
  });

  std::unordered_map<TileIndex, std::vector<StaticPoint>, TileIndexHash> bins;
  for (std::size_t s = 0; s < sweeps.size(); ++s) {
    SweepOutcome& outcome = outcomes[s];
    if (outcome.error) {
      result.rejected.push_back({s, *outcome.error});
      continue;
    }
    result.points_removed += outcome.removed;
    result.points_kept += outcome.points.size();
    result.map.ExtendTraversal(sweeps[s].traversal_id, sweeps[s].timestamp);
    for (StaticPoint& p : outcome.points) {
      bins[result.map.TileOf(p.position.x(), p.position.y())].push_back(p);
    }
    outcome.points = {};
  }

  std::vector<TileIndex> keys;
  keys.reserve(bins.size());
  for (const auto& [key, points] : bins) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  for (const TileIndex& key : keys) {
    std::vector<StaticPoint>& points = bins[key];
    std::sort(points.begin(), points.end(),
              [](const StaticPoint& a, const StaticPoint& b) {
                return a.Key() < b.Key();
              });
    for (const StaticPoint& p : points) {
      result.map.AddPoint(p.position, p.traversal_id, p.timestamp);
    }
  }
  return result;
}

void RetrievalQuery::Validate() const {
  if (!(range > 0.0)) {
    throw std::invalid_argument("retrieval range must be positive");
  }
  if (!(time_exclusion_window >= 0.0)) {
    throw std::invalid_argument("time exclusion window must be >= 0");
  }
}

PointCloud RetrievePatch(const TiledMap& map, const RetrievalQuery& query) {
  query.Validate();
  const double tx = query.ego_pose.translation().x();
  const double ty = query.ego_pose.translation().y();
  const double range = query.range;

  std::optional<TimeSpan> span = query.current_span;
  if (!span && query.current_traversal) {
    const auto it = map.traversal_meta().find(*query.current_traversal);
    if (it != map.traversal_meta().end()) span = it->second;
  }
  std::optional<TimeSpan> blocked;
  if (span) {
    blocked = TimeSpan{span->begin - query.time_exclusion_window,
                       span->end + query.time_exclusion_window};
  }

  // The L-infinity test below is evaluated on differences, which can round
  // differently from tx - range; pad the window by a few ulps to match.
  const double pad = 8.0 * std::numeric_limits<double>::epsilon() *
                     (std::max(std::abs(tx), std::abs(ty)) + range);
  const TileIndex lo = map.TileOf(tx - range - pad, ty - range - pad);
  const TileIndex hi = map.TileOf(tx + range + pad, ty + range + pad);
  std::vector<TileIndex> candidates;
  const double window_tiles = (static_cast<double>(hi.i) - lo.i + 1) *
                              (static_cast<double>(hi.j) - lo.j + 1);
  if (window_tiles <= static_cast<double>(map.tiles().size())) {
    for (std::int32_t i = lo.i; i <= hi.i; ++i) {
      for (std::int32_t j = lo.j; j <= hi.j; ++j) {
        if (map.tiles().count({i, j})) candidates.push_back({i, j});
      }
    }
  } else {
    for (const auto& [key, cloud] : map.tiles()) {
      if (key.i >= lo.i && key.i <= hi.i && key.j >= lo.j && key.j <= hi.j) {
        candidates.push_back(key);
      }
    }
    std::sort(candidates.begin(), candidates.end());
  }

  PointCloud patch;
  patch.traversal_ids.emplace();
  patch.timestamps.emplace();
  for (const TileIndex& key : candidates) {
    const PointCloud& tile = map.tiles().at(key);
    const auto& ids = *tile.traversal_ids;
    const auto& times = *tile.timestamps;
    for (std::size_t k = 0; k < tile.size(); ++k) {
      const Point3& p = tile.positions[k];
      if (std::max(std::abs(p.x() - tx), std::abs(p.y() - ty)) > range) {
        continue;
      }
      if (query.excluded_traversals.count(ids[k])) continue;
      if (query.current_traversal && ids[k] == *query.current_traversal) {
        continue;
      }
      if (blocked && times[k] >= blocked->begin && times[k] <= blocked->end) {
        continue;
      }
      patch.positions.push_back(p);
      patch.traversal_ids->push_back(ids[k]);
      patch.timestamps->push_back(times[k]);
    }
  }
  return patch;
}

PointCloud StatisticalOutlierRemoval(const PointCloud& cloud, int k,
                                     double std_ratio) {
  if (k < 1) throw std::invalid_argument("outlier removal needs k >= 1");
  if (cloud.size() <= static_cast<std::size_t>(k)) {
    throw InputError("insufficient points for k-NN statistics");
  }
  const KdTree tree(cloud.positions);
  std::vector<double> mean_distance(cloud.size());
  ParallelFor(cloud.size(), [&](std::size_t i) {
    const auto neighbors = tree.KNearest(cloud.positions[i],
                                         static_cast<std::size_t>(k),
                                         static_cast<std::uint32_t>(i));
    double sum = 0.0;
    for (const Neighbor& n : neighbors) sum += std::sqrt(n.squared_distance);
    mean_distance[i] = sum / static_cast<double>(neighbors.size());
  });

  const double n = static_cast<double>(cloud.size());
  double mu = 0.0;
  for (double d : mean_distance) mu += d;
  mu /= n;
  double sq = 0.0;
  for (double d : mean_distance) sq += (d - mu) * (d - mu);
  const double sigma = std::sqrt(sq / (n - 1.0));
  const double threshold = mu + std_ratio * sigma;

  PointCloud kept;
  if (cloud.traversal_ids) kept.traversal_ids.emplace();
  if (cloud.timestamps) kept.timestamps.emplace();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (mean_distance[i] <= threshold) kept.AppendFrom(cloud, i);
  }
  return kept;
}

namespace {

using VoxelKey = std::array<std::int64_t, 3>;

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : k) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) +
           (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

PointCloud VoxelDownsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) {
    throw std::invalid_argument("voxel size must be positive");
  }
  struct Accumulator {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::size_t count = 0;
  };
  std::unordered_map<VoxelKey, Accumulator, VoxelKeyHash> voxels;
  voxels.reserve(cloud.size());
  for (const Point3& p : cloud.positions) {
    Accumulator& acc = voxels[{CellIndex(p.x(), voxel_size),
                               CellIndex(p.y(), voxel_size),
                               CellIndex(p.z(), voxel_size)}];
    acc.sum += p;
    ++acc.count;
  }
  std::vector<std::pair<VoxelKey, Point3>> means;
  means.reserve(voxels.size());
  for (const auto& [key, acc] : voxels) {
    means.emplace_back(key, acc.sum / static_cast<double>(acc.count));
  }
  std::sort(means.begin(), means.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  PointCloud pooled;
  pooled.positions.reserve(means.size());
  for (const auto& [key, mean] : means) pooled.positions.push_back(mean);
  return pooled;
}

PointCloud ToEgoFrame(const PointCloud& patch_global, const Pose& ego_pose) {
  return TransformPoints(Invert(ego_pose), patch_global);
}

PatchResult RetrieveEgoPatch(const TiledMap& map, const RetrievalQuery& query,
                             const PatchOptions& options) {
  PatchResult result;
  PointCloud patch = RetrievePatch(map, query);
  result.retrieved = patch.size();
  if (patch.size() > static_cast<std::size_t>(options.outlier_neighbors)) {
    patch = StatisticalOutlierRemoval(patch, options.outlier_neighbors,
                                      options.outlier_std_ratio);
  }
  result.after_outlier_removal = patch.size();
  patch = VoxelDownsample(patch, options.pool_voxel);
  result.patch_ego = ToEgoFrame(patch, query.ego_pose);
  return result;
}

}  // namespace mapprior
