#include "mapprior/pv_encoder.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mapprior/binary_io.h"
#include "mapprior/errors.h"
#include "mapprior/parallel.h"

namespace mapprior {

DepthRaster Rasterize(const CameraModel& camera, const PointCloud& patch_ego,
                      double d_max, double range) {
  if (!(d_max > 0.0)) throw std::invalid_argument("d_max must be positive");
  if (!(range > 0.0)) throw std::invalid_argument("range must be positive");
  camera.Validate();
  const int w = camera.width;
  const int h = camera.height;

  Image2D<double> best(w, h, std::numeric_limits<double>::infinity());
  Image2D<std::uint32_t> winner(w, h, std::numeric_limits<std::uint32_t>::max());
  for (std::size_t i = 0; i < patch_ego.size(); ++i) {
    const auto projection = ProjectPoint(camera, patch_ego.positions[i]);
    if (!projection) continue;
    const int u = static_cast<int>(std::floor(projection->u));
    const int v = static_cast<int>(std::floor(projection->v));
    if (projection->depth < best.at(u, v)) {
      best.at(u, v) = projection->depth;
      winner.at(u, v) = static_cast<std::uint32_t>(i);
    }
  }

  DepthRaster raster{Image2D<double>(w, h), Image2D<float>(w, h),
                     Image2D<std::uint8_t>(w, h),
                     {Image2D<float>(w, h), Image2D<float>(w, h),
                      Image2D<float>(w, h)}};
  for (std::size_t p = 0; p < best.data.size(); ++p) {
    const std::uint32_t index = winner.data[p];
    if (index == std::numeric_limits<std::uint32_t>::max()) continue;
    const double depth = best.data[p];
    raster.depth.data[p] = depth;
    raster.d_norm.data[p] =
        static_cast<float>(std::clamp(depth / d_max, 0.0, 1.0));
    raster.mask.data[p] = 1;
    const Point3& point = patch_ego.positions[index];
    for (int a = 0; a < 3; ++a) {
      raster.xyz_norm[a].data[p] =
          static_cast<float>(std::clamp(point[a] / range, -1.0, 1.0));
    }
  }
  return raster;
}

double EmbeddingFrequency(int k, int embedding_dim) {
  const int pairs = embedding_dim / 2;
  if (pairs <= 1) return kEmbeddingMinFrequency;
  const double exponent = static_cast<double>(k) / (pairs - 1);
  return kEmbeddingMinFrequency *
         std::pow(kEmbeddingMaxFrequency / kEmbeddingMinFrequency, exponent);
}

std::vector<double> DepthEmbedding(double d_norm, int embedding_dim) {
  if (embedding_dim < 2 || embedding_dim % 2 != 0) {
    throw std::invalid_argument("embedding dimension must be even and >= 2");
  }
  const double d = std::clamp(d_norm, 0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(embedding_dim));
  for (int k = 0; k < embedding_dim / 2; ++k) {
    const double phase = EmbeddingFrequency(k, embedding_dim) * d;
    out[2 * k] = std::sin(phase);
    out[2 * k + 1] = std::cos(phase);
  }
  return out;
}

namespace {

// Squared distance from every pixel to the nearest valid pixel. Pixels with
// no valid pixel anywhere get a value >= (w + h)^2.
std::vector<std::int64_t> SquaredDistanceTransform(
    const Image2D<std::uint8_t>& mask) {
  const int w = mask.width;
  const int h = mask.height;
  const std::int64_t inf = w + h;
  std::vector<std::int64_t> g(static_cast<std::size_t>(w) * h);
  ParallelFor(static_cast<std::size_t>(w), [&](std::size_t column) {
    const int u = static_cast<int>(column);
    std::int64_t d = inf;
    for (int v = 0; v < h; ++v) {
      d = mask.at(u, v) ? 0 : std::min(d + 1, inf);
      g[static_cast<std::size_t>(v) * w + u] = d;
    }
    for (int v = h - 2; v >= 0; --v) {
      auto& cell = g[static_cast<std::size_t>(v) * w + u];
      cell = std::min(cell, g[static_cast<std::size_t>(v + 1) * w + u] + 1);
    }
  });

  std::vector<std::int64_t> dist(g.size());
  ParallelFor(static_cast<std::size_t>(h), [&](std::size_t row) {
    const std::int64_t* gr = &g[row * w];
    std::int64_t* out = &dist[row * w];
    auto f = [&](std::int64_t x, std::int64_t i) {
      return (x - i) * (x - i) + gr[i] * gr[i];
    };
    // First column where parabola u beats parabola i (i < u).
    auto sep = [&](std::int64_t i, std::int64_t u) {
      const std::int64_t num = u * u - i * i + gr[u] * gr[u] - gr[i] * gr[i];
      const std::int64_t den = 2 * (u - i);
      std::int64_t q = num / den;
      if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
      return q;
    };
    std::vector<std::int64_t> s(static_cast<std::size_t>(w));
    std::vector<std::int64_t> t(static_cast<std::size_t>(w));
    int q = 0;
    s[0] = 0;
    t[0] = 0;
    for (std::int64_t u = 1; u < w; ++u) {
      while (q >= 0 && f(t[q], s[q]) > f(t[q], u)) --q;
      if (q < 0) {
        q = 0;
        s[0] = u;
      } else {
        const std::int64_t next = 1 + sep(s[q], u);
        if (next < w) {
          ++q;
          s[q] = u;
          t[q] = next;
        }
      }
    }
    for (std::int64_t u = w - 1; u >= 0; --u) {
      out[u] = f(u, s[q]);
      if (u == t[q]) --q;
    }
  });
  return dist;
}

}  // namespace

SpreadResult NearestValidSpread(const Image2D<float>& d_norm,
                                const Image2D<std::uint8_t>& mask,
                                int radius) {
  if (radius < 1) throw std::invalid_argument("spread radius must be >= 1");
  if (d_norm.width != mask.width || d_norm.height != mask.height) {
    throw std::invalid_argument("depth and mask sizes differ");
  }
  const int w = mask.width;
  const int h = mask.height;
  SpreadResult result{Image2D<float>(w, h, 0.0f), Image2D<float>(w, h, 1.0f)};
  if (w == 0 || h == 0) return result;

  // Offsets grouped by squared length, each group in (dv, du) order, which
  // is the (v, u) tie order for a fixed query pixel.
  const std::int64_t r2 = static_cast<std::int64_t>(radius) * radius;
  std::vector<std::vector<std::pair<int, int>>> rings(
      static_cast<std::size_t>(r2) + 1);
  for (int dv = -radius; dv <= radius; ++dv) {
    for (int du = -radius; du <= radius; ++du) {
      const std::int64_t d2 = static_cast<std::int64_t>(dv) * dv + du * du;
      if (d2 <= r2) rings[static_cast<std::size_t>(d2)].emplace_back(dv, du);
    }
  }

  const std::vector<std::int64_t> dist = SquaredDistanceTransform(mask);
  ParallelFor(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < w; ++u) {
      const std::int64_t d2 = dist[static_cast<std::size_t>(v) * w + u];
      if (d2 > r2) continue;
      for (const auto& [dv, du] : rings[static_cast<std::size_t>(d2)]) {
        const int pv = v + dv;
        const int pu = u + du;
        if (pv < 0 || pv >= h || pu < 0 || pu >= w || !mask.at(pu, pv)) {
          continue;
        }
        result.d_near.at(u, v) = d_norm.at(pu, pv);
        result.delta_norm.at(u, v) = static_cast<float>(
            std::sqrt(static_cast<double>(d2)) / radius);
        break;
      }
    }
  });
  return result;
}

void PVParams::Validate() const {
  if (!(d_max > 0.0)) throw std::invalid_argument("pv.d_max must be > 0");
  if (!(range > 0.0)) throw std::invalid_argument("range must be > 0");
  if (spread_radius < 1) {
    throw std::invalid_argument("pv.spread_radius must be >= 1");
  }
  if (embedding_dim < 2 || embedding_dim % 2 != 0) {
    throw std::invalid_argument("pv.embedding_dim must be even and >= 2");
  }
}

std::vector<std::string> PVChannelNames(int embedding_dim) {
  std::vector<std::string> names = {"d_norm", "mask"};
  for (int k = 0; k < embedding_dim / 2; ++k) {
    names.push_back("embed_sin_" + std::to_string(k));
    names.push_back("embed_cos_" + std::to_string(k));
  }
  for (const char* n : {"x_norm", "y_norm", "z_norm", "d_near", "delta_norm"}) {
    names.emplace_back(n);
  }
  return names;
}

PVMapTensor AssemblePVTensor(const CameraModel& camera,
                             const PointCloud& patch_ego,
                             const PVParams& params) {
  params.Validate();
  const DepthRaster raster =
      Rasterize(camera, patch_ego, params.d_max, params.range);
  const SpreadResult spread =
      NearestValidSpread(raster.d_norm, raster.mask, params.spread_radius);

  PVMapTensor tensor;
  tensor.camera_id = camera.id;
  tensor.height = camera.height;
  tensor.width = camera.width;
  tensor.embedding_dim = params.embedding_dim;
  tensor.d_max = params.d_max;
  tensor.range = params.range;
  tensor.spread_radius = params.spread_radius;
  tensor.data.assign(static_cast<std::size_t>(tensor.height) * tensor.width *
                         tensor.channels(),
                     0.0f);
  for (int v = 0; v < tensor.height; ++v) {
    for (int u = 0; u < tensor.width; ++u) {
      std::span<float> px = tensor.Pixel(v, u);
      px[tensor.NearDepthChannel()] = spread.d_near.at(u, v);
      px[tensor.DistanceChannel()] = spread.delta_norm.at(u, v);
      if (!raster.mask.at(u, v)) continue;
      const float d = raster.d_norm.at(u, v);
      px[PVMapTensor::kDepthChannel] = d;
      px[PVMapTensor::kMaskChannel] = 1.0f;
      const std::vector<double> embedding =
          DepthEmbedding(d, params.embedding_dim);
      for (int k = 0; k < params.embedding_dim; ++k) {
        px[tensor.EmbeddingChannel(k)] = static_cast<float>(embedding[k]);
      }
      for (int a = 0; a < 3; ++a) {
        px[tensor.XyzChannel(a)] = raster.xyz_norm[a].at(u, v);
      }
    }
  }
  return tensor;
}

std::vector<PVMapTensor> AssemblePVTensors(std::span<const CameraModel> cameras,
                                           const PointCloud& patch_ego,
                                           const PVParams& params) {
  std::vector<PVMapTensor> tensors(cameras.size());
  ParallelFor(cameras.size(), [&](std::size_t c) {
    tensors[c] = AssemblePVTensor(cameras[c], patch_ego, params);
  });
  return tensors;
}

void WritePVTensor(std::ostream& out, const PVMapTensor& tensor,
                   const std::string& config_json) {
  nlohmann::json header = {
      {"format", "mapprior-pv"},
      {"version", 1},
      {"shape", {tensor.height, tensor.width, tensor.channels()}},
      {"layout", "HWC"},
      {"dtype", "f32le"},
      {"channels", PVChannelNames(tensor.embedding_dim)},
      {"d_max", tensor.d_max},
      {"range", tensor.range},
      {"spread_radius", tensor.spread_radius},
      {"embedding_dim", tensor.embedding_dim},
      {"camera_id", tensor.camera_id},
  };
  if (!config_json.empty()) header["config"] = nlohmann::json::parse(config_json);
  out << header.dump() << '\n';
  for (float value : tensor.data) binary::Write<float>(out, value);
}

void WritePVTensorFile(const std::string& path, const PVMapTensor& tensor,
                       const std::string& config_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write tensor file: " + path);
  WritePVTensor(out, tensor, config_json);
  if (!out) throw InputError("failed writing tensor file: " + path);
}

PVMapTensor ReadPVTensorFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open tensor file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": missing header");
  PVMapTensor tensor;
  try {
    const nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("format") != "mapprior-pv") {
      throw InputError(path + ": not a PV tensor file");
    }
    tensor.height = header.at("shape")[0].get<int>();
    tensor.width = header.at("shape")[1].get<int>();
    tensor.embedding_dim = header.at("embedding_dim").get<int>();
    tensor.d_max = header.at("d_max").get<double>();
    tensor.range = header.at("range").get<double>();
    tensor.spread_radius = header.at("spread_radius").get<int>();
    tensor.camera_id = header.at("camera_id").get<std::string>();
    if (header.at("shape")[2].get<int>() != tensor.channels()) {
      throw InputError(path + ": channel count disagrees with embedding_dim");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": bad header: " + e.what());
  }
  const std::size_t count = static_cast<std::size_t>(tensor.height) *
                            tensor.width * tensor.channels();
  tensor.data.resize(count);
  try {
    for (float& value : tensor.data) value = binary::Read<float>(in);
  } catch (const InputError&) {
    throw InputError(path + ": truncated tensor data");
  }
  return tensor;
}

}  // namespace mapprior
