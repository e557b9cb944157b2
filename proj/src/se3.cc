#include <cmath>

#include "mapprior/pose_align.h"

namespace mapprior {
namespace {

// Below this rotation angle the closed forms lose digits; truncated series
// are exact to double precision there.
constexpr double kSeriesAngle = 1e-2;

Eigen::Matrix3d Hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),  //
      w.z(), 0.0, -w.x(),   //
      -w.y(), w.x(), 0.0;
  return m;
}

}  // namespace

Pose ExpSE3(const Vector6d& xi) {
  const Eigen::Vector3d omega = xi.head<3>();
  const Eigen::Vector3d rho = xi.tail<3>();
  const double theta = omega.norm();
  const double t2 = theta * theta;

  double half_sinc;  // sin(theta/2) / theta
  double a;          // (1 - cos theta) / theta^2
  double b;          // (theta - sin theta) / theta^3
  if (theta < kSeriesAngle) {
    half_sinc = 0.5 - t2 / 48.0 + t2 * t2 / 3840.0;
    a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0;
    b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0;
  } else {
    const double s = std::sin(0.5 * theta);
    half_sinc = s / theta;
    a = 2.0 * s * s / t2;
    b = (theta - std::sin(theta)) / (t2 * theta);
  }
  const Eigen::Quaterniond q(std::cos(0.5 * theta), half_sinc * omega.x(),
                             half_sinc * omega.y(), half_sinc * omega.z());
  const Eigen::Matrix3d w = Hat(omega);
  const Eigen::Matrix3d v = Eigen::Matrix3d::Identity() + a * w + b * w * w;
  return Pose(q, v * rho);
}

Vector6d LogSE3(const Pose& pose) {
  Eigen::Quaterniond q = pose.rotation();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Eigen::Vector3d vec = q.vec();
  const double s = vec.norm();
  const double theta = 2.0 * std::atan2(s, q.w());
  const Eigen::Vector3d omega =
      s > 1e-12 ? Eigen::Vector3d(theta / s * vec) : Eigen::Vector3d(2.0 / q.w() * vec);

  const double t2 = theta * theta;
  double c;  // (1 - (theta/2) cot(theta/2)) / theta^2
  if (theta < kSeriesAngle) {
    c = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 +
        t2 * t2 * t2 / 1209600.0;
  } else {
    const double half = 0.5 * theta;
    c = (1.0 - half * std::cos(half) / std::sin(half)) / t2;
  }
  const Eigen::Matrix3d w = Hat(omega);
  const Eigen::Matrix3d v_inv =
      Eigen::Matrix3d::Identity() - 0.5 * w + c * w * w;
  Vector6d xi;
  xi.head<3>() = omega;
  xi.tail<3>() = v_inv * pose.translation();
  return xi;
}

}  // namespace mapprior
