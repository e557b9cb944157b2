#include "mapprior/bev_encoder.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "mapprior/binary_io.h"
#include "mapprior/errors.h"
#include "mapprior/grid_index.h"

namespace mapprior {

std::size_t SparseVoxelGrid::point_count() const {
  std::size_t total = 0;
  for (const VoxelEntry& e : entries) total += e.count;
  return total;
}

void VoxelizeOptions::Validate() const {
  if (!(voxel_size > 0.0)) {
    throw std::invalid_argument("bev.voxel_size must be > 0");
  }
  if (!(range > 0.0)) throw std::invalid_argument("bev.range must be > 0");
  if (!(z_min < z_max)) {
    throw std::invalid_argument("bev.z_min must be < bev.z_max");
  }
}

namespace {

struct IndexHash {
  std::size_t operator()(const std::array<std::int32_t, 3>& k) const {
    std::uint64_t h = static_cast<std::uint32_t>(k[0]);
    h = h * 0x9e3779b97f4a7c15ull ^ static_cast<std::uint32_t>(k[1]);
    h = h * 0x9e3779b97f4a7c15ull ^ static_cast<std::uint32_t>(k[2]);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

}  // namespace

SparseVoxelGrid Voxelize(const PointCloud& patch_ego,
                         const VoxelizeOptions& options) {
  options.Validate();
  struct Accumulator {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::uint32_t count = 0;
  };
  const double v = options.voxel_size;
  std::unordered_map<std::array<std::int32_t, 3>, Accumulator, IndexHash>
      voxels;
  for (const Point3& p : patch_ego.positions) {
    if (!(p.x() >= -options.range && p.x() < options.range &&
          p.y() >= -options.range && p.y() < options.range &&
          p.z() >= options.z_min && p.z() < options.z_max)) {
      continue;
    }
    Accumulator& acc = voxels[{static_cast<std::int32_t>(CellIndex(p.x(), v)),
                               static_cast<std::int32_t>(CellIndex(p.y(), v)),
                               static_cast<std::int32_t>(CellIndex(p.z(), v))}];
    acc.sum += p;
    ++acc.count;
  }

  SparseVoxelGrid grid;
  grid.voxel_size = v;
  grid.range = options.range;
  grid.z_min = options.z_min;
  grid.z_max = options.z_max;
  grid.voxel_relative = options.voxel_relative;
  grid.entries.reserve(voxels.size());
  for (const auto& [index, acc] : voxels) {
    VoxelEntry entry;
    entry.index = index;
    entry.count = acc.count;
    entry.mean = acc.sum / static_cast<double>(acc.count);
    for (int a = 0; a < 3; ++a) {
      // The exact mean lies in the cell; rounding of the sum must not push
      // it across a face.
      const double lo = v * index[a];
      const double hi = std::nextafter(v * (index[a] + 1.0),
                                       -std::numeric_limits<double>::infinity());
      entry.mean[a] = std::clamp(entry.mean[a], lo, hi);
      if (options.voxel_relative) entry.mean[a] -= lo;
    }
    grid.entries.push_back(entry);
  }
  std::sort(grid.entries.begin(), grid.entries.end(),
            [](const VoxelEntry& a, const VoxelEntry& b) {
              return a.index < b.index;
            });
  return grid;
}

DenseBev ToDenseBev(const SparseVoxelGrid& grid, int cells) {
  if (cells < 1) throw std::invalid_argument("BEV cell count must be >= 1");
  DenseBev bev;
  bev.cells = cells;
  bev.range = grid.range;
  const std::size_t n = static_cast<std::size_t>(cells) * cells;
  bev.occupancy.assign(n, 0);
  bev.height.assign(n, 0.0);
  const double edge = 2.0 * grid.range / cells;
  for (const VoxelEntry& e : grid.entries) {
    const double cx = (e.index[0] + 0.5) * grid.voxel_size;
    const double cy = (e.index[1] + 0.5) * grid.voxel_size;
    const std::int64_t ix = CellIndex(cx + grid.range, edge);
    const std::int64_t iy = CellIndex(cy + grid.range, edge);
    if (ix < 0 || ix >= cells || iy < 0 || iy >= cells) continue;
    const double z = grid.voxel_relative
                         ? e.mean.z() + grid.voxel_size * e.index[2]
                         : e.mean.z();
    const std::size_t k = static_cast<std::size_t>(iy) * cells + ix;
    bev.height[k] = bev.occupancy[k] == 0 ? z : std::max(bev.height[k], z);
    ++bev.occupancy[k];
  }
  return bev;
}

void WriteVoxelGrid(std::ostream& out, const SparseVoxelGrid& grid,
                    const std::string& config_json) {
  out << "mapprior-voxels 1\n";
  out << fmt::format("voxel_size {}\n", grid.voxel_size);
  out << fmt::format("range {}\n", grid.range);
  out << fmt::format("z_bounds {} {}\n", grid.z_min, grid.z_max);
  out << fmt::format("voxel_relative {}\n", grid.voxel_relative ? 1 : 0);
  out << fmt::format("count {}\n", grid.entries.size());
  if (!config_json.empty()) out << "config " << config_json << '\n';
  out << "end_header\n";
  for (const VoxelEntry& e : grid.entries) {
    for (std::int32_t i : e.index) binary::Write<std::int32_t>(out, i);
    for (int a = 0; a < 3; ++a) {
      binary::Write<float>(out, static_cast<float>(e.mean[a]));
    }
    binary::Write<std::uint32_t>(out, e.count);
  }
}

void WriteVoxelFile(const std::string& path, const SparseVoxelGrid& grid,
                    const std::string& config_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write voxel file: " + path);
  WriteVoxelGrid(out, grid, config_json);
  if (!out) throw InputError("failed writing voxel file: " + path);
}

SparseVoxelGrid ReadVoxelFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open voxel file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "mapprior-voxels 1") {
    throw InputError(path + ": not a voxel file");
  }
  SparseVoxelGrid grid;
  std::uint64_t count = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      ended = true;
      break;
    }
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    bool ok = true;
    if (key == "voxel_size") {
      ok = static_cast<bool>(fields >> grid.voxel_size);
    } else if (key == "range") {
      ok = static_cast<bool>(fields >> grid.range);
    } else if (key == "z_bounds") {
      ok = static_cast<bool>(fields >> grid.z_min >> grid.z_max);
    } else if (key == "voxel_relative") {
      int flag = 0;
      ok = static_cast<bool>(fields >> flag);
      grid.voxel_relative = flag != 0;
    } else if (key == "count") {
      ok = static_cast<bool>(fields >> count);
    } else if (key != "config") {
      ok = false;
    }
    if (!ok) throw InputError(path + ": bad header line '" + line + "'");
  }
  if (!ended) throw InputError(path + ": missing end_header");
  try {
    grid.entries.resize(count);
    for (VoxelEntry& e : grid.entries) {
      for (std::int32_t& i : e.index) i = binary::Read<std::int32_t>(in);
      for (int a = 0; a < 3; ++a) e.mean[a] = binary::Read<float>(in);
      e.count = binary::Read<std::uint32_t>(in);
    }
  } catch (const InputError&) {
    throw InputError(path + ": truncated voxel records");
  }
  return grid;
}

}  // namespace mapprior
