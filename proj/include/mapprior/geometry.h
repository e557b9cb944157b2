#ifndef MAPPRIOR_GEOMETRY_H_
#define MAPPRIOR_GEOMETRY_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mapprior {

// Rigid transform in SE(3). A pose maps points from its child frame into its
// parent frame: x_parent = R * x_child + t. The global ego pose is
// ego->global, a camera extrinsic is ego->camera.
//
// Quaternion convention: Hamilton, stored by Eigen. Every text format in this
// project writes quaternions scalar-last as (qx, qy, qz, qw).
class Pose {
 public:
  Pose() : rotation_(Eigen::Quaterniond::Identity()), translation_(0, 0, 0) {}

  // Normalizes `rotation`. Throws InputError on a zero-norm or non-finite
  // quaternion, or a non-finite translation.
  Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation);

  static Pose Identity() { return Pose(); }
  static Pose FromTranslation(const Eigen::Vector3d& translation);
  // Rotation about +z by `yaw` radians followed by `translation`.
  static Pose FromYawTranslation(double yaw,
                                 const Eigen::Vector3d& translation);
  static Pose FromMatrix(const Eigen::Matrix3d& rotation,
                         const Eigen::Vector3d& translation);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix3d RotationMatrix() const { return rotation_.toRotationMatrix(); }
  Eigen::Matrix4d Matrix() const;

  Eigen::Vector3d operator*(const Eigen::Vector3d& point) const {
    return rotation_ * point + translation_;
  }

 private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
};

// Applies `b` first, then `a` (a * b).
Pose Compose(const Pose& a, const Pose& b);
Pose Invert(const Pose& pose);

using Point3 = Eigen::Vector3d;

// Points with optional per-point provenance. Attribute arrays, when present,
// have one entry per point.
struct PointCloud {
  std::vector<Point3> positions;
  std::optional<std::vector<std::uint32_t>> traversal_ids;
  std::optional<std::vector<double>> timestamps;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  // Throws InputError if a coordinate is non-finite or an attribute array has
  // the wrong length.
  void Validate() const;

  // Appends point `index` of `other`, including attributes this cloud carries.
  void AppendFrom(const PointCloud& other, std::size_t index);
};

PointCloud TransformPoints(const Pose& pose, const PointCloud& cloud);

// Pinhole camera, no distortion. `extrinsic` maps ego coordinates into the
// camera frame (z forward, x right, y down).
struct CameraModel {
  std::string id;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  Pose extrinsic;

  // Throws InputError unless fx, fy > 0, width, height > 0 and the principal
  // point lies inside the image.
  void Validate() const;
};

// Points at or closer than this depth are culled by ProjectPoint.
inline constexpr double kMinProjectionDepth = 1e-3;

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

// Continuous pixel coordinates of an ego-frame point. Returns nullopt when the
// point is behind the near plane or outside [0,width) x [0,height).
std::optional<Projection> ProjectPoint(const CameraModel& camera,
                                       const Point3& point_ego);

// Pose file: one record per line, whitespace separated,
//   sequence_id frame_id timestamp qx qy qz qw tx ty tz
// Lines starting with '#' and blank lines are ignored.
struct PoseRecord {
  std::string sequence_id;
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  Pose pose;
};

std::vector<PoseRecord> ReadPoseFile(const std::string& path);
std::vector<PoseRecord> ParsePoseRecords(std::istream& in,
                                         const std::string& source_name);
void WritePoseFile(const std::string& path,
                   const std::vector<PoseRecord>& records,
                   const std::string& header_comment = "");

// "qx qy qz qw tx ty tz" with shortest round-trip formatting.
std::string FormatPose(const Pose& pose);
// Parses seven whitespace-separated numbers in FormatPose order.
Pose ParsePose(const std::string& text);

}  // namespace mapprior

#endif  // MAPPRIOR_GEOMETRY_H_
