#ifndef MAPPRIOR_AUGMENT_H_
#define MAPPRIOR_AUGMENT_H_

#include <cstdint>
#include <string_view>
#include <vector>

#include "mapprior/geometry.h"
#include "mapprior/pv_encoder.h"

namespace mapprior {

enum class MaskDomain { kImage, kBevGround };

// Regular lattice of masked squares. In every period x period cell the
// square [offset, offset + side)^2 (wrapped) is masked. Image masks use
// integer pixels with side = round(ratio * period); ground masks work in
// meters with side = ratio * period.
struct GridMask {
  MaskDomain domain = MaskDomain::kImage;
  double period = 1.0;
  double ratio = 0.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  double side() const;
  // Image masks take pixel indices (u, v); ground masks take ego (x, y).
  bool IsMasked(double x, double y) const;
};

struct GridMaskConfig {
  MaskDomain domain = MaskDomain::kImage;
  double period_min = 60.0;
  double period_max = 120.0;
  double ratio_min = 0.2;
  double ratio_max = 0.4;

  static GridMaskConfig ImageDefaults();
  static GridMaskConfig BevDefaults();

  // Throws std::invalid_argument unless 0 < period_min <= period_max and
  // 0 <= ratio_min <= ratio_max < 1.
  void Validate() const;
};

// Deterministic in (seed, config): period, ratio and offset are drawn
// uniformly from the configured ranges with a 64-bit Mersenne Twister.
// Image masks draw integer periods and offsets.
GridMask SampleGridMask(std::uint64_t seed, const GridMaskConfig& config);

enum class MaskModality : std::uint64_t { kImage = 1, kPvTensor = 2, kBev = 3 };

// Per-(frame, modality) seed: splitmix64 of the base seed, frame index and
// modality tag, so image and map masks are independent draws.
std::uint64_t DeriveMaskSeed(std::uint64_t base_seed, std::uint64_t frame,
                             MaskModality modality);

// Interleaved 8-bit image (e.g. RGB).
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;
};

// Masked pixels become 0 in every channel.
ImageU8 ApplyImageMask(const GridMask& mask, const ImageU8& image);

// Masked pixels read as "no prior": every channel 0 except delta_norm = 1.
PVMapTensor ApplyPVMask(const GridMask& mask, const PVMapTensor& tensor);

// Drops points whose (x, y) falls in a masked ground cell, any z.
PointCloud ApplyBevMask(const GridMask& mask, const PointCloud& patch_ego);

std::string_view MaskDomainName(MaskDomain domain);

}  // namespace mapprior

#endif  // MAPPRIOR_AUGMENT_H_
