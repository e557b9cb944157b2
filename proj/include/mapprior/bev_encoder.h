#ifndef MAPPRIOR_BEV_ENCODER_H_
#define MAPPRIOR_BEV_ENCODER_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mapprior/geometry.h"

namespace mapprior {

inline constexpr double kDefaultBevVoxelSize = 0.2;
inline constexpr double kDefaultBevRange = 50.0;
inline constexpr double kDefaultBevZMin = -5.0;
inline constexpr double kDefaultBevZMax = 3.0;
inline constexpr int kDefaultBevCells = 128;

struct VoxelEntry {
  std::array<std::int32_t, 3> index{};
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  std::uint32_t count = 0;
};

// Occupied voxels of an ego-frame patch with the mean coordinate of their
// points. Entries are sorted by (ix, iy, iz).
struct SparseVoxelGrid {
  double voxel_size = kDefaultBevVoxelSize;
  double range = kDefaultBevRange;
  double z_min = kDefaultBevZMin;
  double z_max = kDefaultBevZMax;
  // Means are absolute ego coordinates unless this is set, in which case they
  // are relative to the voxel's minimum corner.
  bool voxel_relative = false;
  std::vector<VoxelEntry> entries;

  std::size_t point_count() const;
};

struct VoxelizeOptions {
  double voxel_size = kDefaultBevVoxelSize;
  double range = kDefaultBevRange;
  double z_min = kDefaultBevZMin;
  double z_max = kDefaultBevZMax;
  bool voxel_relative = false;

  // Throws std::invalid_argument on a violated constraint.
  void Validate() const;
};

// Keeps points in [-range, range)^2 x [z_min, z_max) and groups them by
// half-open voxel. Every mean lies inside its voxel.
SparseVoxelGrid Voxelize(const PointCloud& patch_ego,
                         const VoxelizeOptions& options = {});

// Dense inspection grid over [-range, range)^2. Cell (ix, iy) aggregates the
// voxels whose centre falls inside it: number of voxels and the largest
// mean z (0 for empty cells).
struct DenseBev {
  int cells = 0;
  double range = 0.0;
  std::vector<std::uint32_t> occupancy;  // row-major [iy][ix]
  std::vector<double> height;

  std::uint32_t occupancy_at(int ix, int iy) const {
    return occupancy[static_cast<std::size_t>(iy) * cells + ix];
  }
  double height_at(int ix, int iy) const {
    return height[static_cast<std::size_t>(iy) * cells + ix];
  }
};

DenseBev ToDenseBev(const SparseVoxelGrid& grid, int cells = kDefaultBevCells);

// Voxel file: header lines
//   mapprior-voxels 1
//   voxel_size <v>
//   range <r>
//   z_bounds <min> <max>
//   voxel_relative <0|1>
//   count <n>
//   config <json>        (optional)
//   end_header
// then n little-endian records (i32 ix, i32 iy, i32 iz, f32 mx, f32 my,
// f32 mz, u32 count).
void WriteVoxelGrid(std::ostream& out, const SparseVoxelGrid& grid,
                    const std::string& config_json = "");
void WriteVoxelFile(const std::string& path, const SparseVoxelGrid& grid,
                    const std::string& config_json = "");
SparseVoxelGrid ReadVoxelFile(const std::string& path);

}  // namespace mapprior

#endif  // MAPPRIOR_BEV_ENCODER_H_
