#include "mapprior/config.h"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "mapprior/errors.h"

namespace mapprior {

using nlohmann::json;

CameraModel MakeForwardCamera(std::string id, double yaw,
                              const Eigen::Vector3d& position, double focal,
                              int width, int height) {
  // Camera axes expressed in the ego frame: z along the heading, x to the
  // right of it, y down.
  const Eigen::Vector3d forward(std::cos(yaw), std::sin(yaw), 0.0);
  const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  Eigen::Matrix3d rotation;
  rotation.row(0) = right;
  rotation.row(1) = down;
  rotation.row(2) = forward;
  CameraModel camera;
  camera.id = std::move(id);
  camera.fx = focal;
  camera.fy = focal;
  camera.cx = 0.5 * width;
  camera.cy = 0.5 * height;
  camera.width = width;
  camera.height = height;
  camera.extrinsic = Pose::FromMatrix(rotation, -(rotation * position));
  return camera;
}

std::vector<CameraModel> PipelineConfig::DefaultCameraRig() {
  static const char* kNames[] = {"front",      "front_left", "rear_left",
                                 "rear",       "rear_right", "front_right"};
  std::vector<CameraModel> rig;
  for (int k = 0; k < 6; ++k) {
    rig.push_back(MakeForwardCamera(kNames[k], k * std::numbers::pi / 3.0,
                                    Eigen::Vector3d(0.0, 0.0, 1.6), 560.0, 960,
                                    640));
  }
  return rig;
}

void PipelineConfig::Validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(range > 0.0, "range", "must be > 0");
  require(tile_size > 0.0, "map.tile_size", "must be > 0");
  require(map_pool_voxel > 0.0, "map.pool_voxel", "must be > 0");
  require(outlier_k >= 1, "map.outlier_k", "must be >= 1");
  require(outlier_std_ratio >= 0.0, "map.outlier_std_ratio", "must be >= 0");
  require(dynamic_margin >= 0.0, "map.dynamic_margin", "must be >= 0");
  require(time_exclusion_window >= 0.0, "map.time_exclusion_window",
          "must be >= 0");
  require(d_max > 0.0, "pv.d_max", "must be > 0");
  require(spread_radius >= 1, "pv.spread_radius", "must be >= 1");
  require(embedding_dim >= 2 && embedding_dim % 2 == 0, "pv.embedding_dim",
          "must be even and >= 2");
  require(bev_voxel > 0.0, "bev.voxel_size", "must be > 0");
  require(bev_range > 0.0, "bev.range", "must be > 0");
  require(z_min < z_max, "bev.z_bounds", "min must be < max");
  require(bev_cells >= 1, "bev.cells", "must be >= 1");
  require(icp.max_correspondence_distance > 0.0, "align.max_correspondence",
          "must be > 0");
  require(icp.min_correspondence_distance > 0.0, "align.min_correspondence",
          "must be > 0");
  require(icp.max_iterations >= 1, "align.max_iterations", "must be >= 1");
  require(align_voxel >= 0.0, "align.voxel", "must be >= 0");
  auto check_mask = [](const GridMaskConfig& mask, const char* period_key,
                       const char* ratio_key) {
    if (!(mask.period_min > 0.0 && mask.period_min <= mask.period_max)) {
      throw ConfigError(period_key, "must satisfy 0 < min <= max");
    }
    if (!(mask.ratio_min >= 0.0 && mask.ratio_min <= mask.ratio_max &&
          mask.ratio_max < 1.0)) {
      throw ConfigError(ratio_key, "must satisfy 0 <= min <= max < 1");
    }
    try {
      mask.Validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(period_key, e.what());
    }
  };
  check_mask(image_mask, "gridmask.image.period_px", "gridmask.image.ratio");
  check_mask(bev_mask, "gridmask.bev.period_m", "gridmask.bev.ratio");
  require(!cameras.empty(), "cameras", "at least one camera is required");
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const CameraModel& camera = cameras[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (cameras[j].id == camera.id) {
        throw ConfigError("cameras", "duplicate camera id '" + camera.id + "'");
      }
    }
    try {
      camera.Validate();
    } catch (const InputError& e) {
      throw ConfigError("cameras", e.what());
    }
  }
}

PVParams PipelineConfig::pv_params() const {
  return {d_max, range, spread_radius, embedding_dim};
}

VoxelizeOptions PipelineConfig::voxelize_options() const {
  return {bev_voxel, bev_range, z_min, z_max, voxel_relative};
}

PatchOptions PipelineConfig::patch_options() const {
  return {outlier_k, outlier_std_ratio, map_pool_voxel};
}

BuildOptions PipelineConfig::build_options() const {
  return {tile_size, dynamic_margin};
}

AlignOptions PipelineConfig::align_options() const {
  AlignOptions options;
  options.icp = icp;
  options.tile_size = tile_size;
  options.voxel_size = align_voxel;
  return options;
}

namespace {

json CameraToJson(const CameraModel& c) {
  const Eigen::Quaterniond& q = c.extrinsic.rotation();
  const Eigen::Vector3d& t = c.extrinsic.translation();
  return {{"id", c.id},
          {"fx", c.fx},
          {"fy", c.fy},
          {"cx", c.cx},
          {"cy", c.cy},
          {"width", c.width},
          {"height", c.height},
          {"extrinsic",
           {{"rotation_xyzw", {q.x(), q.y(), q.z(), q.w()}},
            {"translation", {t.x(), t.y(), t.z()}}}}};
}

CameraModel CameraFromJson(const json& j) {
  CameraModel c;
  c.id = j.at("id").get<std::string>();
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  const auto q = j.at("extrinsic").at("rotation_xyzw").get<std::vector<double>>();
  const auto t = j.at("extrinsic").at("translation").get<std::vector<double>>();
  if (q.size() != 4 || t.size() != 3) {
    throw ConfigError("cameras", "extrinsic needs 4 quaternion and 3 translation values");
  }
  c.extrinsic = Pose(Eigen::Quaterniond(q[3], q[0], q[1], q[2]),
                     Eigen::Vector3d(t[0], t[1], t[2]));
  return c;
}

json Range(double lo, double hi) { return json::array({lo, hi}); }

void Flatten(const json& node, const std::string& prefix,
             std::map<std::string, json>& out) {
  if (node.is_object() && prefix != "cameras") {
    for (const auto& [key, value] : node.items()) {
      Flatten(value, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else {
    out[prefix] = node;
  }
}

}  // namespace

json PipelineConfig::ToJson() const {
  json cams = json::array();
  for (const CameraModel& c : cameras) cams.push_back(CameraToJson(c));
  return {
      {"range", range},
      {"map",
       {{"tile_size", tile_size},
        {"pool_voxel", map_pool_voxel},
        {"outlier_k", outlier_k},
        {"outlier_std_ratio", outlier_std_ratio},
        {"dynamic_margin", dynamic_margin},
        {"time_exclusion_window", time_exclusion_window}}},
      {"pv",
       {{"d_max", d_max},
        {"spread_radius", spread_radius},
        {"embedding_dim", embedding_dim}}},
      {"bev",
       {{"voxel_size", bev_voxel},
        {"range", bev_range},
        {"z_bounds", Range(z_min, z_max)},
        {"cells", bev_cells},
        {"voxel_relative", voxel_relative}}},
      {"gridmask",
       {{"image",
         {{"period_px", Range(image_mask.period_min, image_mask.period_max)},
          {"ratio", Range(image_mask.ratio_min, image_mask.ratio_max)}}},
        {"bev",
         {{"period_m", Range(bev_mask.period_min, bev_mask.period_max)},
          {"ratio", Range(bev_mask.ratio_min, bev_mask.ratio_max)}}},
        {"seed", seed}}},
      {"align",
       {{"max_correspondence", icp.max_correspondence_distance},
        {"min_correspondence", icp.min_correspondence_distance},
        {"max_iterations", icp.max_iterations},
        {"tolerance", icp.tolerance},
        {"voxel", align_voxel}}},
      {"cameras", cams},
  };
}

PipelineConfig PipelineConfig::FromJson(const json& input) {
  std::map<std::string, json> values;
  Flatten(input, "", values);
  PipelineConfig config;
  auto take = [&](const std::string& key, auto& field) {
    const auto it = values.find(key);
    if (it == values.end()) return;
    try {
      field = it->second.get<std::remove_reference_t<decltype(field)>>();
    } catch (const json::exception& e) {
      throw ConfigError(key, std::string("bad value: ") + e.what());
    }
    values.erase(it);
  };
  auto take_range = [&](const std::string& key, double& lo, double& hi) {
    std::vector<double> pair = {lo, hi};
    take(key, pair);
    if (pair.size() != 2) throw ConfigError(key, "expects [min, max]");
    lo = pair[0];
    hi = pair[1];
  };
  take("range", config.range);
  take("map.tile_size", config.tile_size);
  take("map.pool_voxel", config.map_pool_voxel);
  take("map.outlier_k", config.outlier_k);
  take("map.outlier_std_ratio", config.outlier_std_ratio);
  take("map.dynamic_margin", config.dynamic_margin);
  take("map.time_exclusion_window", config.time_exclusion_window);
  take("pv.d_max", config.d_max);
  take("pv.spread_radius", config.spread_radius);
  take("pv.embedding_dim", config.embedding_dim);
  take("bev.voxel_size", config.bev_voxel);
  take("bev.range", config.bev_range);
  take_range("bev.z_bounds", config.z_min, config.z_max);
  take("bev.cells", config.bev_cells);
  take("bev.voxel_relative", config.voxel_relative);
  take_range("gridmask.image.period_px", config.image_mask.period_min,
             config.image_mask.period_max);
  take_range("gridmask.image.ratio", config.image_mask.ratio_min,
             config.image_mask.ratio_max);
  take_range("gridmask.bev.period_m", config.bev_mask.period_min,
             config.bev_mask.period_max);
  take_range("gridmask.bev.ratio", config.bev_mask.ratio_min,
             config.bev_mask.ratio_max);
  take("gridmask.seed", config.seed);
  take("align.max_correspondence", config.icp.max_correspondence_distance);
  take("align.min_correspondence", config.icp.min_correspondence_distance);
  take("align.max_iterations", config.icp.max_iterations);
  take("align.tolerance", config.icp.tolerance);
  take("align.voxel", config.align_voxel);
  if (const auto it = values.find("cameras"); it != values.end()) {
    try {
      config.cameras.clear();
      for (const json& c : it->second) config.cameras.push_back(CameraFromJson(c));
    } catch (const json::exception& e) {
      throw ConfigError("cameras", std::string("bad camera: ") + e.what());
    } catch (const InputError& e) {
      throw ConfigError("cameras", e.what());
    }
    values.erase(it);
  }
  if (!values.empty()) {
    throw ConfigError(values.begin()->first, "unknown config key");
  }
  return config;
}

PipelineConfig LoadPipelineConfig(const std::string& path,
                                  const std::vector<std::string>& overrides) {
  json merged = PipelineConfig().ToJson();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config", path + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config", "top level must be an object");
    // Reject unknown keys from the file itself, not only after merging.
    PipelineConfig::FromJson(file);
    merged.merge_patch(file);
  }
  for (const std::string& entry : overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(entry, "override must look like key=value");
    }
    const std::string key = entry.substr(0, eq);
    const std::string text = entry.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    std::string pointer;
    for (std::size_t start = 0; start <= key.size();) {
      const auto dot = key.find('.', start);
      pointer += "/" + key.substr(start, dot - start);
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    const json::json_pointer ptr(pointer);
    if (!merged.contains(ptr)) throw ConfigError(key, "unknown config key");
    merged[ptr] = value;
  }
  PipelineConfig config = PipelineConfig::FromJson(merged);
  config.Validate();
  return config;
}

}  // namespace mapprior
