#ifndef MAPPRIOR_CONFIG_H_
#define MAPPRIOR_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mapprior/augment.h"
#include "mapprior/bev_encoder.h"
#include "mapprior/geometry.h"
#include "mapprior/map_store.h"
#include "mapprior/pose_align.h"
#include "mapprior/pv_encoder.h"

namespace mapprior {

// Every tunable of the pipeline. Serialized as nested JSON whose dotted paths
// are the config keys, e.g. "map.pool_voxel" or "gridmask.image.period_px".
struct PipelineConfig {
  // Perception range R shared by retrieval and the PV xyz normalization.
  double range = 50.0;

  // map.*
  double tile_size = kDefaultTileSize;
  double map_pool_voxel = kDefaultMapPoolVoxel;
  int outlier_k = kDefaultOutlierNeighbors;
  double outlier_std_ratio = kDefaultOutlierStdRatio;
  double dynamic_margin = kDefaultDynamicMargin;
  double time_exclusion_window = kDefaultTimeExclusionWindow;

  // pv.*
  double d_max = kNearRangeDepthMax;
  int spread_radius = 24;
  int embedding_dim = 16;

  // bev.*
  double bev_voxel = kDefaultBevVoxelSize;
  double bev_range = kDefaultBevRange;
  double z_min = kDefaultBevZMin;
  double z_max = kDefaultBevZMax;
  int bev_cells = kDefaultBevCells;
  bool voxel_relative = false;

  // gridmask.*
  GridMaskConfig image_mask = GridMaskConfig::ImageDefaults();
  GridMaskConfig bev_mask = GridMaskConfig::BevDefaults();
  // The single source of randomness.
  std::uint64_t seed = 0;

  // align.*
  IcpOptions icp;
  double align_voxel = 0.4;

  std::vector<CameraModel> cameras = DefaultCameraRig();

  // Six 960x640 pinhole cameras at 1.6 m height, 60 degrees apart, the first
  // looking along ego +x.
  static std::vector<CameraModel> DefaultCameraRig();

  // Throws ConfigError naming the first violated key.
  void Validate() const;

  PVParams pv_params() const;
  VoxelizeOptions voxelize_options() const;
  PatchOptions patch_options() const;
  BuildOptions build_options() const;
  AlignOptions align_options() const;

  nlohmann::json ToJson() const;
  // Throws ConfigError on unknown keys or mistyped values.
  static PipelineConfig FromJson(const nlohmann::json& json);

  // Compact single-line JSON of the effective config.
  std::string Echo() const { return ToJson().dump(); }
};

// Camera looking along ego heading `yaw` from `position` (ego frame).
CameraModel MakeForwardCamera(std::string id, double yaw,
                              const Eigen::Vector3d& position, double focal,
                              int width, int height);

// Defaults, then the JSON file at `path` (if non-empty) merged on top, then
// each "dotted.key=value" override. Values parse as JSON when possible and
// as strings otherwise. The result is validated.
PipelineConfig LoadPipelineConfig(const std::string& path,
                                  const std::vector<std::string>& overrides);

}  // namespace mapprior

#endif  // MAPPRIOR_CONFIG_H_
