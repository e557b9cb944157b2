#include "mapprior/augment.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mapprior {

double GridMask::side() const {
  return domain == MaskDomain::kImage ? std::round(ratio * period)
                                      : ratio * period;
}

bool GridMask::IsMasked(double x, double y) const {
  const double s = side();
  if (s <= 0.0) return false;
  auto wrap = [&](double value) {
    double m = std::fmod(value, period);
    if (m < 0.0) m += period;
    return m >= period ? 0.0 : m;
  };
  return wrap(x - offset_x) < s && wrap(y - offset_y) < s;
}

GridMaskConfig GridMaskConfig::ImageDefaults() {
  return {MaskDomain::kImage, 60.0, 120.0, 0.2, 0.4};
}

GridMaskConfig GridMaskConfig::BevDefaults() {
  return {MaskDomain::kBevGround, 4.0, 8.0, 0.2, 0.4};
}

void GridMaskConfig::Validate() const {
  if (!(period_min > 0.0 && period_min <= period_max)) {
    throw std::invalid_argument("grid mask period range must satisfy 0 < min <= max");
  }
  if (!(ratio_min >= 0.0 && ratio_min <= ratio_max && ratio_max < 1.0)) {
    throw std::invalid_argument("grid mask ratio range must satisfy 0 <= min <= max < 1");
  }
  if (domain == MaskDomain::kImage &&
      std::floor(period_max) < std::ceil(period_min)) {
    throw std::invalid_argument("image grid mask period range holds no integer");
  }
}

namespace {

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

GridMask SampleGridMask(std::uint64_t seed, const GridMaskConfig& config) {
  config.Validate();
  std::mt19937_64 rng(seed);
  GridMask mask;
  mask.domain = config.domain;
  if (config.domain == MaskDomain::kImage) {
    const double lo = std::ceil(config.period_min);
    const double hi = std::floor(config.period_max);
    mask.period = std::min(hi, lo + std::floor(Uniform01(rng) * (hi - lo + 1)));
  } else {
    mask.period = config.period_min +
                  Uniform01(rng) * (config.period_max - config.period_min);
  }
  mask.ratio =
      config.ratio_min + Uniform01(rng) * (config.ratio_max - config.ratio_min);
  if (config.domain == MaskDomain::kImage) {
    mask.offset_x = std::floor(Uniform01(rng) * mask.period);
    mask.offset_y = std::floor(Uniform01(rng) * mask.period);
  } else {
    mask.offset_x = Uniform01(rng) * mask.period;
    mask.offset_y = Uniform01(rng) * mask.period;
  }
  return mask;
}

std::uint64_t DeriveMaskSeed(std::uint64_t base_seed, std::uint64_t frame,
                             MaskModality modality) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  };
  std::uint64_t h = splitmix(base_seed);
  h = splitmix(h ^ frame);
  return splitmix(h ^ static_cast<std::uint64_t>(modality));
}

ImageU8 ApplyImageMask(const GridMask& mask, const ImageU8& image) {
  if (mask.domain != MaskDomain::kImage) {
    throw std::invalid_argument("image masking needs an image-space mask");
  }
  ImageU8 out = image;
  for (int v = 0; v < image.height; ++v) {
    for (int u = 0; u < image.width; ++u) {
      if (!mask.IsMasked(u, v)) continue;
      const std::size_t base =
          (static_cast<std::size_t>(v) * image.width + u) * image.channels;
      for (int c = 0; c < image.channels; ++c) out.data[base + c] = 0;
    }
  }
  return out;
}

PVMapTensor ApplyPVMask(const GridMask& mask, const PVMapTensor& tensor) {
  if (mask.domain != MaskDomain::kImage) {
    throw std::invalid_argument("PV tensor masking needs an image-space mask");
  }
  PVMapTensor out = tensor;
  for (int v = 0; v < tensor.height; ++v) {
    for (int u = 0; u < tensor.width; ++u) {
      if (!mask.IsMasked(u, v)) continue;
      std::span<float> px = out.Pixel(v, u);
      std::fill(px.begin(), px.end(), 0.0f);
      px[out.DistanceChannel()] = 1.0f;
    }
  }
  return out;
}

PointCloud ApplyBevMask(const GridMask& mask, const PointCloud& patch_ego) {
  if (mask.domain != MaskDomain::kBevGround) {
    throw std::invalid_argument("BEV masking needs a ground mask");
  }
  PointCloud kept;
  if (patch_ego.traversal_ids) kept.traversal_ids.emplace();
  if (patch_ego.timestamps) kept.timestamps.emplace();
  for (std::size_t i = 0; i < patch_ego.size(); ++i) {
    const Point3& p = patch_ego.positions[i];
    if (!mask.IsMasked(p.x(), p.y())) kept.AppendFrom(patch_ego, i);
  }
  return kept;
}

std::string_view MaskDomainName(MaskDomain domain) {
  return domain == MaskDomain::kImage ? "image" : "bev";
}

}  // namespace mapprior
