#include "mapprior/map_io.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <utility>
#include <sstream>

#include <fmt/format.h>

#include "mapprior/binary_io.h"
#include "mapprior/errors.h"

namespace mapprior {

namespace fs = std::filesystem;

void WriteTile(std::ostream& out, double tile_size, const TileIndex& index,
               const PointCloud& cloud) {
  out.write("MPTL", 4);
  binary::Write<std::uint32_t>(out, kTileFormatVersion);
  binary::Write<double>(out, tile_size);
  binary::Write<std::int32_t>(out, index.i);
  binary::Write<std::int32_t>(out, index.j);
  binary::Write<std::uint64_t>(out, cloud.size());
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const Point3& p = cloud.positions[k];
    binary::Write<float>(out, static_cast<float>(p.x()));
    binary::Write<float>(out, static_cast<float>(p.y()));
    binary::Write<float>(out, static_cast<float>(p.z()));
    binary::Write<std::uint32_t>(
        out, cloud.traversal_ids ? (*cloud.traversal_ids)[k] : 0u);
    binary::Write<double>(out, cloud.timestamps ? (*cloud.timestamps)[k] : 0.0);
  }
}

void WriteTileFile(const std::string& path, double tile_size,
                   const TileIndex& index, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write tile file: " + path);
  WriteTile(out, tile_size, index, cloud);
  if (!out) throw InputError("failed writing tile file: " + path);
}

TileFile ReadTile(std::istream& in, const std::string& source_name) {
  try {
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != "MPTL") {
      throw InputError("bad magic, expected MPTL");
    }
    const auto version = binary::Read<std::uint32_t>(in);
    if (version != kTileFormatVersion) {
      throw InputError(fmt::format("unsupported tile version {}", version));
    }
    TileFile tile;
    tile.tile_size = binary::Read<double>(in);
    tile.index.i = binary::Read<std::int32_t>(in);
    tile.index.j = binary::Read<std::int32_t>(in);
    const auto count = binary::Read<std::uint64_t>(in);
    tile.cloud.traversal_ids.emplace();
    tile.cloud.timestamps.emplace();
    for (std::uint64_t k = 0; k < count; ++k) {
      const float x = binary::Read<float>(in);
      const float y = binary::Read<float>(in);
      const float z = binary::Read<float>(in);
      tile.cloud.positions.emplace_back(x, y, z);
      tile.cloud.traversal_ids->push_back(binary::Read<std::uint32_t>(in));
      tile.cloud.timestamps->push_back(binary::Read<double>(in));
    }
    tile.cloud.Validate();
    return tile;
  } catch (const InputError& e) {
    throw InputError(source_name + ": " + e.what());
  }
}

TileFile ReadTileFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open tile file: " + path);
  return ReadTile(in, path);
}

std::string TileFileName(const TileIndex& index) {
  return fmt::format("tile_{}_{}.mptl", index.i, index.j);
}

void WriteMapDirectory(const std::string& dir, const TiledMap& map,
                       const std::string& config_json) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create map directory " + dir);
  const std::vector<TileIndex> keys = map.SortedTileIndices();
  for (const TileIndex& key : keys) {
    WriteTileFile((fs::path(dir) / TileFileName(key)).string(),
                  map.tile_size(), key, map.tiles().at(key));
  }
  const std::string manifest_path = (fs::path(dir) / "manifest.txt").string();
  std::ofstream out(manifest_path);
  if (!out) throw InputError("cannot write manifest: " + manifest_path);
  out << "mapprior-map 1\n";
  out << fmt::format("tile_size {}\n", map.tile_size());
  for (const auto& [id, span] : map.traversal_meta()) {
    out << fmt::format("traversal {} {} {}\n", id, span.begin, span.end);
  }
  for (const TileIndex& key : keys) {
    out << fmt::format("tile {} {} {}\n", key.i, key.j,
                       map.tiles().at(key).size());
  }
  if (!config_json.empty()) out << "config " << config_json << '\n';
  if (!out) throw InputError("failed writing manifest: " + manifest_path);
}

TiledMap ReadMapDirectory(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / "manifest.txt").string();
  std::ifstream in(manifest_path);
  if (!in) throw InputError("cannot open map manifest: " + manifest_path);
  std::string line;
  if (!std::getline(in, line) || line != "mapprior-map 1") {
    throw InputError(manifest_path + ": not a mapprior map manifest");
  }
  double tile_size = kDefaultTileSize;
  std::vector<std::pair<std::uint32_t, TimeSpan>> traversals;
  std::vector<TileIndex> tiles;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    std::istringstream fields(line);
    std::string tag;
    if (!(fields >> tag)) continue;
    bool ok = true;
    if (tag == "tile_size") {
      ok = static_cast<bool>(fields >> tile_size);
    } else if (tag == "traversal") {
      std::uint32_t id;
      TimeSpan span;
      ok = static_cast<bool>(fields >> id >> span.begin >> span.end);
      traversals.emplace_back(id, span);
    } else if (tag == "tile") {
      TileIndex key;
      std::uint64_t count;
      ok = static_cast<bool>(fields >> key.i >> key.j >> count);
      tiles.push_back(key);
    } else if (tag != "config") {
      ok = false;
    }
    if (!ok) {
      throw InputError(fmt::format("{}:{}: malformed manifest line",
                                   manifest_path, line_number));
    }
  }
  TiledMap map(tile_size);
  for (const auto& [id, span] : traversals) {
    map.ExtendTraversal(id, span.begin);
    map.ExtendTraversal(id, span.end);
  }
  for (const TileIndex& key : tiles) {
    const TileFile tile =
        ReadTileFile((fs::path(dir) / TileFileName(key)).string());
    for (std::size_t k = 0; k < tile.cloud.size(); ++k) {
      map.AddPoint(tile.cloud.positions[k], (*tile.cloud.traversal_ids)[k],
                   (*tile.cloud.timestamps)[k]);
    }
  }
  return map;
}

PointCloud ReadPointCloudFile(const std::string& path) {
  if (fs::path(path).extension() == ".mptl") return ReadTileFile(path).cloud;
  std::ifstream in(path);
  if (!in) throw InputError("cannot open point cloud file: " + path);
  PointCloud cloud;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    double x, y, z;
    if (!(fields >> x >> y >> z)) {
      throw InputError(
          fmt::format("{}:{}: expected 'x y z'", path, line_number));
    }
    cloud.positions.emplace_back(x, y, z);
  }
  return cloud;
}

std::vector<Box3D> ReadBoxFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open box file: " + path);
  std::vector<Box3D> boxes;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    Box3D b;
    if (!(fields >> b.center.x() >> b.center.y() >> b.center.z() >> b.width >>
          b.height >> b.length >> b.yaw) ||
        !(b.width > 0 && b.height > 0 && b.length > 0)) {
      throw InputError(fmt::format(
          "{}:{}: expected 'cx cy cz w h l yaw' with positive sizes", path,
          line_number));
    }
    boxes.push_back(b);
  }
  return boxes;
}

std::vector<Sweep> ReadSweepManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest: " + path);
  const std::filesystem::path base =
      std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return (fp.is_absolute() ? fp : base / fp).string();
  };

  struct Entry {
    std::string sequence;
    std::int64_t frame = 0;
    std::uint32_t traversal = 0;
    std::string cloud;
    std::string boxes;
    int line = 0;
  };
  std::vector<Entry> entries;
  std::string pose_file;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string kind;
    fields >> kind;
    if (kind == "poses") {
      if (!(fields >> pose_file)) {
        throw InputError(fmt::format("{}:{}: 'poses' needs a file", path,
                                     line_number));
      }
      pose_file = resolve(pose_file);
    } else if (kind == "sweep") {
      Entry e;
      e.line = line_number;
      if (!(fields >> e.sequence >> e.frame >> e.traversal >> e.cloud)) {
        throw InputError(fmt::format(
            "{}:{}: expected 'sweep <sequence> <frame> <traversal> <cloud> "
            "[boxes]'",
            path, line_number));
      }
      e.cloud = resolve(e.cloud);
      if (fields >> e.boxes) e.boxes = resolve(e.boxes);
      entries.push_back(std::move(e));
    } else {
      throw InputError(fmt::format("{}:{}: unknown record '{}'", path,
                                   line_number, kind));
    }
  }
  if (entries.empty()) return {};
  if (pose_file.empty()) {
    throw InputError(path + ": sweeps listed without a 'poses' record");
  }

  std::map<std::pair<std::string, std::int64_t>, PoseRecord> poses;
  for (PoseRecord& r : ReadPoseFile(pose_file)) {
    poses[{r.sequence_id, r.frame_id}] = std::move(r);
  }
  std::vector<Sweep> sweeps;
  sweeps.reserve(entries.size());
  for (const Entry& e : entries) {
    const auto it = poses.find({e.sequence, e.frame});
    if (it == poses.end()) {
      throw InputError(fmt::format("{}:{}: no pose for {} frame {} in {}",
                                   path, e.line, e.sequence, e.frame,
                                   pose_file));
    }
    Sweep s;
    s.ego_pose = it->second.pose;
    s.timestamp = it->second.timestamp;
    s.traversal_id = e.traversal;
    s.cloud = ReadPointCloudFile(e.cloud);
    // Sweep points take the record's timestamp and traversal.
    s.cloud.traversal_ids.reset();
    s.cloud.timestamps.reset();
    if (!e.boxes.empty()) s.boxes = ReadBoxFile(e.boxes);
    sweeps.push_back(std::move(s));
  }
  return sweeps;
}

}  // namespace mapprior
