#ifndef MAPPRIOR_PV_ENCODER_H_
#define MAPPRIOR_PV_ENCODER_H_

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mapprior/geometry.h"

namespace mapprior {

// Row-major H x W image.
template <typename T>
struct Image2D {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image2D() = default;
  Image2D(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  const T& at(int u, int v) const {
    return data[static_cast<std::size_t>(v) * width + u];
  }
};

// Sparse per-camera raster of an ego-frame patch.
struct DepthRaster {
  Image2D<double> depth;          // closest depth in meters, 0 where empty
  Image2D<float> d_norm;          // depth / d_max clipped to [0,1]
  Image2D<std::uint8_t> mask;     // 1 iff at least one point landed
  Image2D<float> xyz_norm[3];     // winning point's ego xyz / range, clipped
};

// Z-buffer rasterization. Each point lands in pixel (floor(u), floor(v)) of
// its continuous projection; the smallest depth wins and ties keep the
// earlier point. Throws std::invalid_argument unless d_max > 0, range > 0.
DepthRaster Rasterize(const CameraModel& camera, const PointCloud& patch_ego,
                      double d_max, double range);

inline constexpr double kEmbeddingMinFrequency = std::numbers::pi;
inline constexpr double kEmbeddingMaxFrequency = 1024.0 * std::numbers::pi;

// Angular frequency of pair k out of embedding_dim / 2, geometric between
// kEmbeddingMinFrequency and kEmbeddingMaxFrequency. A single pair uses the
// minimum frequency.
double EmbeddingFrequency(int k, int embedding_dim);

// (sin(w_k d), cos(w_k d)) for k = 0 .. E/2-1, interleaved, with d clipped to
// [0,1]. Throws std::invalid_argument unless E is even and >= 2.
std::vector<double> DepthEmbedding(double d_norm, int embedding_dim);

struct SpreadResult {
  Image2D<float> d_near;
  Image2D<float> delta_norm;
};

// For every pixel, copies d_norm of the nearest valid pixel (Euclidean pixel
// distance, ties to the smallest (v, u)) if it lies within `radius` and
// stores distance / radius; otherwise d_near = 0 and delta_norm = 1. Runs an
// exact separable distance transform, O(HW) plus tie resolution.
SpreadResult NearestValidSpread(const Image2D<float>& d_norm,
                                const Image2D<std::uint8_t>& mask, int radius);

struct PVParams {
  double d_max = 61.0;
  double range = 50.0;
  int spread_radius = 24;
  int embedding_dim = 16;

  // Throws std::invalid_argument on a violated constraint.
  void Validate() const;
};

inline constexpr double kNearRangeDepthMax = 61.0;
inline constexpr double kLongRangeDepthMax = 152.0;

// Per-camera multi-channel map encoding, stored (H, W, C) row-major.
// Channels: 0 d_norm | 1 mask | 2..2+E depth embedding | 2+E..5+E ego xyz /
// range | 5+E d_near | 6+E delta_norm.
struct PVMapTensor {
  std::string camera_id;
  int height = 0;
  int width = 0;
  int embedding_dim = 0;
  double d_max = 0.0;
  double range = 0.0;
  int spread_radius = 0;
  std::vector<float> data;

  int channels() const { return 7 + embedding_dim; }
  static constexpr int kDepthChannel = 0;
  static constexpr int kMaskChannel = 1;
  int EmbeddingChannel(int k) const { return 2 + k; }
  int XyzChannel(int axis) const { return 2 + embedding_dim + axis; }
  int NearDepthChannel() const { return 5 + embedding_dim; }
  int DistanceChannel() const { return 6 + embedding_dim; }

  float& at(int v, int u, int c) {
    return data[(static_cast<std::size_t>(v) * width + u) * channels() + c];
  }
  const float& at(int v, int u, int c) const {
    return data[(static_cast<std::size_t>(v) * width + u) * channels() + c];
  }
  std::span<float> Pixel(int v, int u) {
    return {&at(v, u, 0), static_cast<std::size_t>(channels())};
  }
  std::span<const float> Pixel(int v, int u) const {
    return {&at(v, u, 0), static_cast<std::size_t>(channels())};
  }
};

std::vector<std::string> PVChannelNames(int embedding_dim);

// Rasterize, embed every valid pixel's d_norm and spread, in that order.
PVMapTensor AssemblePVTensor(const CameraModel& camera,
                             const PointCloud& patch_ego,
                             const PVParams& params);

// One tensor per camera, computed concurrently.
std::vector<PVMapTensor> AssemblePVTensors(std::span<const CameraModel> cameras,
                                           const PointCloud& patch_ego,
                                           const PVParams& params);

// Tensor container: one line of JSON header, '\n', then H*W*C little-endian
// f32 values in (H, W, C) order. `config_json` (if non-empty) is embedded
// under the "config" key.
void WritePVTensor(std::ostream& out, const PVMapTensor& tensor,
                   const std::string& config_json = "");
void WritePVTensorFile(const std::string& path, const PVMapTensor& tensor,
                       const std::string& config_json = "");
PVMapTensor ReadPVTensorFile(const std::string& path);

}  // namespace mapprior

#endif  // MAPPRIOR_PV_ENCODER_H_
