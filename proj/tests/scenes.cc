#include "scenes.h"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mapprior::testing {

PointCloud RandomViewCloud(std::mt19937_64& rng, const CameraModel& camera,
                           std::size_t count) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Pose camera_to_ego = Invert(camera.extrinsic);
  PointCloud cloud;
  cloud.positions.reserve(count);
  while (cloud.positions.size() < count) {
    if (!cloud.positions.empty() && unit(rng) < 0.05) {
      // Duplicate an earlier point: identical depth, later index.
      const std::size_t j = static_cast<std::size_t>(
          unit(rng) * static_cast<double>(cloud.positions.size()));
      cloud.positions.push_back(cloud.positions[std::min(j, cloud.positions.size() - 1)]);
      continue;
    }
    // Sample behind the camera too, and beyond the image borders.
    const double z = std::round((unit(rng) * 80.0 - 5.0) * 8.0) / 8.0;
    const double u = unit(rng) * camera.width * 1.2 - 0.1 * camera.width;
    const double v = unit(rng) * camera.height * 1.2 - 0.1 * camera.height;
    const double depth = std::abs(z) + 0.25;
    const Eigen::Vector3d in_camera((u - camera.cx) * depth / camera.fx,
                                    (v - camera.cy) * depth / camera.fy,
                                    z >= 0 ? depth : -depth);
    cloud.positions.push_back(camera_to_ego * in_camera);
  }
  return cloud;
}

void RandomSparseDepth(std::mt19937_64& rng, int width, int height,
                       double fill, Image2D<float>& d_norm,
                       Image2D<std::uint8_t>& mask) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  d_norm = Image2D<float>(width, height, 0.0f);
  mask = Image2D<std::uint8_t>(width, height, 0);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (unit(rng) < fill) {
        mask.at(u, v) = 1;
        d_norm.at(u, v) = static_cast<float>(unit(rng));
      }
    }
  }
}

RandomMap MakeRandomMap(std::mt19937_64& rng, std::size_t count,
                        int traversals, double extent, double tile_size) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, traversals - 1);
  RandomMap out{TiledMap(tile_size), {}};
  out.points.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::uint32_t t = static_cast<std::uint32_t>(pick(rng));
    // Traversal t drives during [t * 5000, t * 5000 + 600].
    const double time = t * 5000.0 + unit(rng) * 600.0;
    double x = (unit(rng) * 2.0 - 1.0) * extent;
    double y = (unit(rng) * 2.0 - 1.0) * extent;
    if (unit(rng) < 0.02) x = tile_size * std::round(x / tile_size);
    if (unit(rng) < 0.02) y = tile_size * std::round(y / tile_size);
    const Point3 p(x, y, unit(rng) * 6.0 - 2.0);
    out.map.AddPoint(p, t, time);
    out.points.push_back({p, t, time});
  }
  return out;
}

PointCloud StructuredScene(std::mt19937_64& rng, std::size_t count) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto s = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  // Boxes and poles are fixed per call so every scene has the same layout
  // family but different sampling.
  struct Block {
    Eigen::Vector3d lo, hi;
  };
  std::vector<Block> blocks;
  for (int b = 0; b < 4; ++b) {
    const Eigen::Vector3d c(s(-9, 9), s(-9, 9), 0.0);
    const Eigen::Vector3d half(s(0.5, 2.0), s(0.5, 2.0), s(0.5, 1.5));
    blocks.push_back({c - Eigen::Vector3d(half.x(), half.y(), 0.0),
                      c + Eigen::Vector3d(half.x(), half.y(), 2 * half.z())});
  }
  std::vector<Eigen::Vector2d> poles;
  for (int p = 0; p < 5; ++p) poles.emplace_back(s(-10, 10), s(-10, 10));

  PointCloud cloud;
  cloud.positions.reserve(count);
  while (cloud.positions.size() < count) {
    const double kind = unit(rng);
    if (kind < 0.35) {
      cloud.positions.emplace_back(s(-12, 12), s(-12, 12), 0.0);
    } else if (kind < 0.5) {
      cloud.positions.emplace_back(s(-12, 12), 12.0, s(0, 4));
    } else if (kind < 0.62) {
      cloud.positions.emplace_back(-12.0, s(-12, 12), s(0, 4));
    } else if (kind < 0.9) {
      const Block& b = blocks[static_cast<std::size_t>(unit(rng) * 4) % 4];
      Eigen::Vector3d p(s(b.lo.x(), b.hi.x()), s(b.lo.y(), b.hi.y()),
                        s(b.lo.z(), b.hi.z()));
      const int face = static_cast<int>(unit(rng) * 5) % 5;
      if (face == 0) p.x() = b.lo.x();
      if (face == 1) p.x() = b.hi.x();
      if (face == 2) p.y() = b.lo.y();
      if (face == 3) p.y() = b.hi.y();
      if (face == 4) p.z() = b.hi.z();
      cloud.positions.push_back(p);
    } else {
      const Eigen::Vector2d& c = poles[static_cast<std::size_t>(unit(rng) * 5) % 5];
      const double a = s(0, 2 * M_PI);
      cloud.positions.emplace_back(c.x() + 0.15 * std::cos(a),
                                   c.y() + 0.15 * std::sin(a), s(0, 5));
    }
  }
  return cloud;
}

PointCloud UniformCloud(std::mt19937_64& rng, std::size_t count,
                        const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud cloud;
  cloud.positions.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    cloud.positions.emplace_back(lo.x() + (hi.x() - lo.x()) * unit(rng),
                                 lo.y() + (hi.y() - lo.y()) * unit(rng),
                                 lo.z() + (hi.z() - lo.z()) * unit(rng));
  }
  return cloud;
}

std::filesystem::path TempDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mapprior_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string ReadBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace mapprior::testing
