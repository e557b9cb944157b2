#include "mapprior/cli.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "mapprior/augment.h"
#include "mapprior/bev_encoder.h"
#include "mapprior/config.h"
#include "mapprior/errors.h"
#include "mapprior/map_io.h"
#include "mapprior/map_store.h"
#include "mapprior/pnm.h"
#include "mapprior/pose_align.h"
#include "mapprior/pv_encoder.h"

namespace mapprior {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
};

PipelineConfig LoadConfig(const CommonFlags& flags) {
  return LoadPipelineConfig(flags.config_path, flags.overrides);
}

void EnsureDirectory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());
}

// Sidecar provenance for formats without a text header.
void WriteSidecar(const std::string& path, const json& body) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << body.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

struct BuildMapArgs {
  std::string manifest;
  std::string out;
};

void CmdBuildMap(const BuildMapArgs& a, const PipelineConfig& config,
                 std::ostream& out) {
  const std::vector<Sweep> sweeps = ReadSweepManifest(a.manifest);
  const BuildResult result = BuildMap(sweeps, config.build_options());
  EnsureDirectory(a.out);
  WriteMapDirectory(a.out, result.map, config.Echo());
  out << fmt::format("sweeps {} rejected {}\n", sweeps.size(),
                     result.rejected.size());
  for (const RejectedSweep& r : result.rejected) {
    out << fmt::format("  rejected sweep {}: {}\n", r.index, r.reason);
  }
  out << fmt::format("tiles {} points_kept {} points_removed {}\n",
                     result.map.tiles().size(), result.points_kept,
                     result.points_removed);
}

// ---------------------------------------------------------------------------

struct RetrieveArgs {
  std::string map;
  std::string pose;
  std::string poses;
  std::string sequence;
  std::int64_t frame = -1;
  std::vector<std::uint32_t> exclude;
  std::int64_t traversal = -1;
  std::string out;
};

Pose ResolveEgoPose(const RetrieveArgs& a) {
  if (!a.pose.empty()) return ParsePose(a.pose);
  for (const PoseRecord& r : ReadPoseFile(a.poses)) {
    if (r.sequence_id == a.sequence && r.frame_id == a.frame) return r.pose;
  }
  throw InputError(fmt::format("{}: no pose for {} frame {}", a.poses,
                               a.sequence, a.frame));
}

void CmdRetrieve(const RetrieveArgs& a, const PipelineConfig& config,
                 std::ostream& out) {
  if (a.pose.empty() == a.poses.empty()) {
    throw ConfigError("pose", "give exactly one of --pose or --poses");
  }
  if (!a.poses.empty() && (a.sequence.empty() || a.frame < 0)) {
    throw ConfigError("pose", "--poses needs --sequence and --frame");
  }
  const TiledMap map = ReadMapDirectory(a.map);
  RetrievalQuery query;
  query.ego_pose = ResolveEgoPose(a);
  query.range = config.range;
  query.time_exclusion_window = config.time_exclusion_window;
  query.excluded_traversals.insert(a.exclude.begin(), a.exclude.end());
  if (a.traversal >= 0) {
    query.current_traversal = static_cast<std::uint32_t>(a.traversal);
  }
  const PatchResult patch =
      RetrieveEgoPatch(map, query, config.patch_options());
  WriteTileFile(a.out, map.tile_size(), TileIndex{0, 0}, patch.patch_ego);
  WriteSidecar(a.out + ".json",
               {{"ego_pose", FormatPose(query.ego_pose)},
                {"excluded_traversals", query.excluded_traversals},
                {"current_traversal", a.traversal},
                {"retrieved", patch.retrieved},
                {"after_outlier_removal", patch.after_outlier_removal},
                {"patch_points", patch.patch_ego.size()},
                {"config", config.ToJson()}});
  out << fmt::format("retrieved {} after_outlier_removal {} patch {}\n",
                     patch.retrieved, patch.after_outlier_removal,
                     patch.patch_ego.size());
}

// ---------------------------------------------------------------------------

struct RasterizeArgs {
  std::string patch;
  std::string out_dir;
  std::vector<std::string> cameras;
};

std::string TensorFileName(const std::string& camera_id) {
  return "pv_" + camera_id + ".mptensor";
}

void CmdRasterize(const RasterizeArgs& a, const PipelineConfig& config,
                  std::ostream& out) {
  std::vector<CameraModel> cameras;
  if (a.cameras.empty()) {
    cameras = config.cameras;
  } else {
    for (const std::string& id : a.cameras) {
      const auto it =
          std::find_if(config.cameras.begin(), config.cameras.end(),
                       [&](const CameraModel& c) { return c.id == id; });
      if (it == config.cameras.end()) {
        throw ConfigError("cameras", "no camera named '" + id + "'");
      }
      cameras.push_back(*it);
    }
  }
  const PointCloud patch = ReadPointCloudFile(a.patch);
  const std::vector<PVMapTensor> tensors =
      AssemblePVTensors(cameras, patch, config.pv_params());
  EnsureDirectory(a.out_dir);
  const std::string echo = config.Echo();
  for (const PVMapTensor& t : tensors) {
    const std::string path = (fs::path(a.out_dir) / TensorFileName(t.camera_id)).string();
    WritePVTensorFile(path, t, echo);
    std::size_t valid = 0;
    for (int v = 0; v < t.height; ++v) {
      for (int u = 0; u < t.width; ++u) {
        valid += t.at(v, u, PVMapTensor::kMaskChannel) > 0.0f;
      }
    }
    out << fmt::format("{} {}x{}x{} valid_pixels {}\n", path, t.height,
                       t.width, t.channels(), valid);
  }
}

// ---------------------------------------------------------------------------

struct VoxelizeArgs {
  std::string patch;
  std::string out;
};

void CmdVoxelize(const VoxelizeArgs& a, const PipelineConfig& config,
                 std::ostream& out) {
  const PointCloud patch = ReadPointCloudFile(a.patch);
  const SparseVoxelGrid grid = Voxelize(patch, config.voxelize_options());
  WriteVoxelFile(a.out, grid, config.Echo());
  out << fmt::format("voxels {} points {}\n", grid.entries.size(),
                     grid.point_count());
}

// ---------------------------------------------------------------------------

struct MaskArgs {
  std::string kind;
  std::string input;
  std::string out;
  std::uint64_t frame = 0;
};

void CmdMask(const MaskArgs& a, const PipelineConfig& config,
             std::ostream& out) {
  MaskModality modality;
  const GridMaskConfig* mask_config;
  if (a.kind == "image") {
    modality = MaskModality::kImage;
    mask_config = &config.image_mask;
  } else if (a.kind == "pv") {
    modality = MaskModality::kPvTensor;
    mask_config = &config.image_mask;
  } else {
    modality = MaskModality::kBev;
    mask_config = &config.bev_mask;
  }
  const GridMask mask =
      SampleGridMask(DeriveMaskSeed(config.seed, a.frame, modality), *mask_config);
  if (a.kind == "image") {
    WritePnm(a.out, ApplyImageMask(mask, ReadPnm(a.input)));
  } else if (a.kind == "pv") {
    WritePVTensorFile(a.out, ApplyPVMask(mask, ReadPVTensorFile(a.input)),
                      config.Echo());
  } else {
    const PointCloud kept = ApplyBevMask(mask, ReadPointCloudFile(a.input));
    WriteTileFile(a.out, config.tile_size, TileIndex{0, 0}, kept);
  }
  const json params = {{"kind", a.kind},
                       {"frame", a.frame},
                       {"domain", std::string(MaskDomainName(mask.domain))},
                       {"period", mask.period},
                       {"ratio", mask.ratio},
                       {"side", mask.side()},
                       {"offset", {mask.offset_x, mask.offset_y}}};
  if (a.kind != "pv") {
    json sidecar = params;
    sidecar["config"] = config.ToJson();
    WriteSidecar(a.out + ".json", sidecar);
  }
  out << params.dump() << '\n';
}

// ---------------------------------------------------------------------------

struct AlignArgs {
  std::string clouds;
  std::string poses;
  std::string out;
  std::string graph_out;
  std::string fixed;
};

std::map<std::string, PointCloud> ReadCloudDirectory(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
  std::map<std::string, PointCloud> clouds;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    const fs::path& p = e.path();
    if (!e.is_regular_file()) continue;
    if (p.extension() != ".mptl" && p.extension() != ".txt") continue;
    const std::string id = p.stem().string();
    if (clouds.count(id)) {
      throw InputError("two cloud files for sequence '" + id + "' in " + dir);
    }
    clouds[id] = ReadPointCloudFile(p.string());
  }
  if (clouds.empty()) throw InputError("no *.mptl or *.txt clouds in " + dir);
  return clouds;
}

void CmdAlign(const AlignArgs& a, const PipelineConfig& config,
              std::ostream& out) {
  const std::map<std::string, PointCloud> clouds = ReadCloudDirectory(a.clouds);
  AlignOptions options = config.align_options();
  if (!a.fixed.empty()) {
    if (!clouds.count(a.fixed)) {
      throw ConfigError("fixed", "no cloud for sequence '" + a.fixed + "'");
    }
    options.fixed = a.fixed;
  }
  const AlignResult result = AlignSequences(clouds, options);

  std::vector<PoseRecord> records;
  if (!a.poses.empty()) {
    records = ReadPoseFile(a.poses);
    for (PoseRecord& r : records) {
      const auto it = result.corrections.find(r.sequence_id);
      if (it != result.corrections.end()) r.pose = Compose(it->second, r.pose);
    }
  } else {
    for (const auto& [id, correction] : result.corrections) {
      records.push_back(PoseRecord{id, 0, 0.0, correction});
    }
  }
  std::string header = "mapprior align\nconfig " + config.Echo();
  header += "\n" + fmt::format("cost {} -> {} iterations {} status {}",
                               result.optimization.initial_cost,
                               result.optimization.final_cost,
                               result.optimization.iterations,
                               result.optimization.status);
  WritePoseFile(a.out, records, header);
  if (!a.graph_out.empty()) WritePoseGraphFile(a.graph_out, result.optimization.graph);

  for (const PairRegistration& p : result.pairs) {
    if (p.registered) {
      out << fmt::format("pair {} <- {}: rmse {} inliers {} iterations {}\n",
                         p.target, p.source, p.icp.rmse,
                         p.icp.inlier_fraction, p.icp.iterations);
    } else {
      out << fmt::format("pair {} <- {}: skipped ({})\n", p.target, p.source,
                         p.message);
    }
  }
  out << fmt::format("pose graph: cost {} -> {} in {} iterations, {}\n",
                     result.optimization.initial_cost,
                     result.optimization.final_cost,
                     result.optimization.iterations,
                     result.optimization.status);
  if (!result.optimization.converged) {
    out << "warning: pose graph did not converge\n";
  }
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string tensor;
  std::string voxels;
  std::string out_dir;
};

// Linear min..max stretch to 0..255; a constant image maps to 0.
template <typename Get>
json WriteGray(const std::string& path, int width, int height, Get get) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      lo = std::min(lo, get(v, u));
      hi = std::max(hi, get(v, u));
    }
  }
  if (width * height == 0) lo = hi = 0.0;
  ImageU8 image{width, height, 1, {}};
  image.data.resize(static_cast<std::size_t>(width) * height, 0);
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      image.data[static_cast<std::size_t>(v) * width + u] =
          static_cast<std::uint8_t>(std::lround((get(v, u) - lo) * scale));
    }
  }
  WritePnm(path, image);
  return {{"file", fs::path(path).filename().string()}, {"min", lo}, {"max", hi}};
}

void CmdInspect(const InspectArgs& a, std::ostream& out) {
  if (a.tensor.empty() == a.voxels.empty()) {
    throw ConfigError("inspect", "give exactly one of --tensor or --voxels");
  }
  EnsureDirectory(a.out_dir);
  json report;
  if (!a.tensor.empty()) {
    const PVMapTensor t = ReadPVTensorFile(a.tensor);
    const std::vector<std::string> names = PVChannelNames(t.embedding_dim);
    json channels = json::array();
    for (int c = 0; c < t.channels(); ++c) {
      const std::string file = fmt::format("channel_{:02d}_{}.pgm", c, names[c]);
      json entry = WriteGray((fs::path(a.out_dir) / file).string(), t.width,
                             t.height, [&](int v, int u) {
                               return static_cast<double>(t.at(v, u, c));
                             });
      entry["name"] = names[c];
      channels.push_back(entry);
    }
    report = {{"source", a.tensor},
              {"camera_id", t.camera_id},
              {"shape", {t.height, t.width, t.channels()}},
              {"channels", channels}};
    out << fmt::format("{} channel images written to {}\n", t.channels(),
                       a.out_dir);
  } else {
    const SparseVoxelGrid grid = ReadVoxelFile(a.voxels);
    const DenseBev bev = ToDenseBev(grid);
    const int n = bev.cells;
    // Row 0 of the image is +y so the picture reads as a map.
    json occ = WriteGray(
        (fs::path(a.out_dir) / "bev_occupancy.pgm").string(), n, n,
        [&](int v, int u) { return double(bev.occupancy_at(u, n - 1 - v)); });
    json height = WriteGray(
        (fs::path(a.out_dir) / "bev_height.pgm").string(), n, n,
        [&](int v, int u) { return bev.height_at(u, n - 1 - v); });
    report = {{"source", a.voxels},
              {"cells", n},
              {"range", bev.range},
              {"voxels", grid.entries.size()},
              {"channels", {occ, height}}};
    out << fmt::format("bev {}x{} images written to {}\n", n, n, a.out_dir);
  }
  WriteSidecar((fs::path(a.out_dir) / "inspect.json").string(), report);
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Map-prior toolkit: tiled LiDAR maps, PV/BEV encodings, "
               "grid masks and cross-sequence alignment"};
  app.name(args.empty() ? "mapprior" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.fallthrough();
  CommonFlags common;
  app.add_option("--config", common.config_path, "JSON config file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides,
                 "Config override key=value (repeatable)");

  BuildMapArgs build;
  CLI::App* build_cmd = app.add_subcommand("build-map", "Build a tiled map");
  build_cmd->add_option("--manifest", build.manifest, "Sweep manifest")->required();
  build_cmd->add_option("--out", build.out, "Output map directory")->required();

  RetrieveArgs retrieve;
  CLI::App* retrieve_cmd =
      app.add_subcommand("retrieve", "Retrieve an ego-frame map patch");
  retrieve_cmd->add_option("--map", retrieve.map, "Map directory")->required();
  retrieve_cmd->add_option("--pose", retrieve.pose,
                           "Ego pose 'qx qy qz qw tx ty tz'");
  retrieve_cmd->add_option("--poses", retrieve.poses, "Pose file");
  retrieve_cmd->add_option("--sequence", retrieve.sequence);
  retrieve_cmd->add_option("--frame", retrieve.frame);
  retrieve_cmd->add_option("--exclude", retrieve.exclude,
                           "Traversal ids to drop (repeatable)");
  retrieve_cmd->add_option("--traversal", retrieve.traversal,
                           "Current traversal id");
  retrieve_cmd->add_option("--out", retrieve.out, "Patch file (.mptl)")->required();

  RasterizeArgs raster;
  CLI::App* raster_cmd =
      app.add_subcommand("rasterize-pv", "Encode a patch into PV tensors");
  raster_cmd->add_option("--patch", raster.patch, "Ego-frame patch")->required();
  raster_cmd->add_option("--out-dir", raster.out_dir)->required();
  raster_cmd->add_option("--camera", raster.cameras,
                         "Camera ids (default: whole rig)");

  VoxelizeArgs voxel;
  CLI::App* voxel_cmd =
      app.add_subcommand("voxelize-bev", "Voxelize a patch for BEV fusion");
  voxel_cmd->add_option("--patch", voxel.patch)->required();
  voxel_cmd->add_option("--out", voxel.out)->required();

  MaskArgs mask;
  CLI::App* mask_cmd = app.add_subcommand("mask", "Apply a grid mask");
  mask_cmd->add_option("--kind", mask.kind)
      ->required()
      ->check(CLI::IsMember({"image", "pv", "bev"}));
  mask_cmd->add_option("--input", mask.input)->required();
  mask_cmd->add_option("--out", mask.out)->required();
  mask_cmd->add_option("--frame", mask.frame, "Frame index for the mask seed");

  AlignArgs align;
  CLI::App* align_cmd =
      app.add_subcommand("align", "Align sequences with ICP and a pose graph");
  align_cmd->add_option("--clouds", align.clouds,
                        "Directory of <sequence>.mptl|.txt global clouds")
      ->required();
  align_cmd->add_option("--poses", align.poses, "Pose file to correct");
  align_cmd->add_option("--out", align.out, "Output pose file")->required();
  align_cmd->add_option("--graph-out", align.graph_out);
  align_cmd->add_option("--fixed", align.fixed, "Anchor sequence");

  InspectArgs inspect;
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect", "Dump tensor channels as images");
  inspect_cmd->add_option("--tensor", inspect.tensor);
  inspect_cmd->add_option("--voxels", inspect.voxels);
  inspect_cmd->add_option("--out-dir", inspect.out_dir)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*inspect_cmd) {
      CmdInspect(inspect, out);
      return kExitOk;
    }
    const PipelineConfig config = LoadConfig(common);
    if (*build_cmd) CmdBuildMap(build, config, out);
    if (*retrieve_cmd) CmdRetrieve(retrieve, config, out);
    if (*raster_cmd) CmdRasterize(raster, config, out);
    if (*voxel_cmd) CmdVoxelize(voxel, config, out);
    if (*mask_cmd) CmdMask(mask, config, out);
    if (*align_cmd) CmdAlign(align, config, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumericalError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInputError;
  }
}

}  // namespace mapprior
