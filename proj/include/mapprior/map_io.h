#ifndef MAPPRIOR_MAP_IO_H_
#define MAPPRIOR_MAP_IO_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "mapprior/map_store.h"

namespace mapprior {

// Tile file, little-endian:
//   "MPTL" | u32 version=1 | f64 tile_size | i32 i | i32 j | u64 count |
//   count x (f32 x, f32 y, f32 z, u32 traversal_id, f64 timestamp)
// Missing attributes are written as zero.
inline constexpr std::uint32_t kTileFormatVersion = 1;

struct TileFile {
  double tile_size = kDefaultTileSize;
  TileIndex index;
  PointCloud cloud;  // always carries traversal ids and timestamps
};

void WriteTile(std::ostream& out, double tile_size, const TileIndex& index,
               const PointCloud& cloud);
void WriteTileFile(const std::string& path, double tile_size,
                   const TileIndex& index, const PointCloud& cloud);
TileFile ReadTile(std::istream& in, const std::string& source_name);
TileFile ReadTileFile(const std::string& path);

std::string TileFileName(const TileIndex& index);

// Map directory: tile_{i}_{j}.mptl per tile plus manifest.txt:
//   mapprior-map 1
//   tile_size <L>
//   traversal <id> <begin> <end>      (one per traversal)
//   tile <i> <j> <count>              (one per tile, sorted)
//   config <json>                     (optional provenance, one line)
void WriteMapDirectory(const std::string& dir, const TiledMap& map,
                       const std::string& config_json = "");
// Points are re-tiled on load, so the tile invariant holds for the f32
// coordinates actually stored.
TiledMap ReadMapDirectory(const std::string& dir);

// Reads a point cloud from a tile file (*.mptl) or a text file with
// "x y z" per line.
PointCloud ReadPointCloudFile(const std::string& path);

// Box file: text, one "cx cy cz w h l yaw" per line, '#' comments.
std::vector<Box3D> ReadBoxFile(const std::string& path);

// Sweep manifest, text with '#' comments:
//   poses <pose_file>
//   sweep <sequence_id> <frame_id> <traversal_id> <cloud_file> [box_file]
// Relative paths resolve against the manifest's directory. A sweep takes its
// ego pose and timestamp from the pose record with the same
// (sequence_id, frame_id); clouds and boxes are in the sweep's ego frame.
std::vector<Sweep> ReadSweepManifest(const std::string& path);

}  // namespace mapprior

#endif  // MAPPRIOR_MAP_IO_H_
