#include "mapprior/geometry.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "mapprior/errors.h"

namespace mapprior {

Pose::Pose(const Eigen::Quaterniond& rotation,
           const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  const double norm = rotation_.norm();
  if (!std::isfinite(norm) || norm < 1e-12) {
    throw InputError("pose rotation quaternion must be finite and non-zero");
  }
  if (!translation_.allFinite()) {
    throw InputError("pose translation must be finite");
  }
  // Already-unit input is kept as is so that normalizing is idempotent and
  // text round trips are bit-stable.
  if (std::abs(norm - 1.0) > 4 * std::numeric_limits<double>::epsilon()) {
    rotation_.coeffs() /= norm;
  }
}

Pose Pose::FromTranslation(const Eigen::Vector3d& translation) {
  return Pose(Eigen::Quaterniond::Identity(), translation);
}

Pose Pose::FromYawTranslation(double yaw, const Eigen::Vector3d& translation) {
  return Pose(Eigen::Quaterniond(
                  Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())),
              translation);
}

Pose Pose::FromMatrix(const Eigen::Matrix3d& rotation,
                      const Eigen::Vector3d& translation) {
  return Pose(Eigen::Quaterniond(rotation), translation);
}

Eigen::Matrix4d Pose::Matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = RotationMatrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Compose(const Pose& a, const Pose& b) {
  return Pose(a.rotation() * b.rotation(),
              a.rotation() * b.translation() + a.translation());
}

Pose Invert(const Pose& pose) {
  const Eigen::Quaterniond inverse_rotation = pose.rotation().conjugate();
  return Pose(inverse_rotation, -(inverse_rotation * pose.translation()));
}

void PointCloud::Validate() const {
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite()) {
      throw InputError(fmt::format("point {} has a non-finite coordinate", i));
    }
  }
  if (traversal_ids && traversal_ids->size() != positions.size()) {
    throw InputError(fmt::format("traversal_ids has {} entries for {} points",
                                 traversal_ids->size(), positions.size()));
  }
  if (timestamps && timestamps->size() != positions.size()) {
    throw InputError(fmt::format("timestamps has {} entries for {} points",
                                 timestamps->size(), positions.size()));
  }
}

void PointCloud::AppendFrom(const PointCloud& other, std::size_t index) {
  positions.push_back(other.positions[index]);
  if (traversal_ids) {
    traversal_ids->push_back(other.traversal_ids ? (*other.traversal_ids)[index]
                                                 : 0u);
  }
  if (timestamps) {
    timestamps->push_back(other.timestamps ? (*other.timestamps)[index] : 0.0);
  }
}

PointCloud TransformPoints(const Pose& pose, const PointCloud& cloud) {
  PointCloud result = cloud;
  const Eigen::Matrix3d rotation = pose.RotationMatrix();
  for (Point3& p : result.positions) {
    p = rotation * p + pose.translation();
  }
  return result;
}

void CameraModel::Validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InputError(fmt::format("camera '{}': focal lengths must be positive",
                                 id));
  }
  if (width <= 0 || height <= 0) {
    throw InputError(fmt::format("camera '{}': image size must be positive",
                                 id));
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InputError(fmt::format(
        "camera '{}': principal point ({}, {}) outside {}x{} image", id, cx,
        cy, width, height));
  }
}

std::optional<Projection> ProjectPoint(const CameraModel& camera,
                                       const Point3& point_ego) {
  const Eigen::Vector3d p = camera.extrinsic * point_ego;
  if (!(p.z() > kMinProjectionDepth)) return std::nullopt;
  const double u = camera.cx + camera.fx * p.x() / p.z();
  const double v = camera.cy + camera.fy * p.y() / p.z();
  if (!(u >= 0.0 && u < camera.width && v >= 0.0 && v < camera.height)) {
    return std::nullopt;
  }
  return Projection{u, v, p.z()};
}

std::string FormatPose(const Pose& pose) {
  const Eigen::Quaterniond& q = pose.rotation();
  const Eigen::Vector3d& t = pose.translation();
  return fmt::format("{} {} {} {} {} {} {}", q.x(), q.y(), q.z(), q.w(),
                     t.x(), t.y(), t.z());
}

Pose ParsePose(const std::string& text) {
  std::istringstream in(text);
  double v[7];
  for (double& x : v) {
    if (!(in >> x)) {
      throw InputError("expected 7 numbers 'qx qy qz qw tx ty tz', got '" +
                       text + "'");
    }
  }
  std::string trailing;
  if (in >> trailing) {
    throw InputError("trailing data after pose: '" + text + "'");
  }
  return Pose(Eigen::Quaterniond(v[3], v[0], v[1], v[2]),
              Eigen::Vector3d(v[4], v[5], v[6]));
}

std::vector<PoseRecord> ParsePoseRecords(std::istream& in,
                                         const std::string& source_name) {
  std::vector<PoseRecord> records;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    PoseRecord record;
    std::string rest;
    if (!(fields >> record.sequence_id >> record.frame_id >>
          record.timestamp)) {
      throw InputError(fmt::format("{}:{}: malformed pose record", source_name,
                                   line_number));
    }
    std::getline(fields, rest);
    try {
      record.pose = ParsePose(rest);
    } catch (const InputError& e) {
      throw InputError(
          fmt::format("{}:{}: {}", source_name, line_number, e.what()));
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<PoseRecord> ReadPoseFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pose file: " + path);
  return ParsePoseRecords(in, path);
}

void WritePoseFile(const std::string& path,
                   const std::vector<PoseRecord>& records,
                   const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write pose file: " + path);
  out << "# sequence_id frame_id timestamp qx qy qz qw tx ty tz\n";
  if (!header_comment.empty()) {
    std::istringstream lines(header_comment);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  for (const PoseRecord& r : records) {
    out << fmt::format("{} {} {} {}\n", r.sequence_id, r.frame_id, r.timestamp,
                       FormatPose(r.pose));
  }
  if (!out) throw InputError("failed writing pose file: " + path);
}

}  // namespace mapprior
