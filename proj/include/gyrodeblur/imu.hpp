#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace gyrodeblur {

/// Monotonic clock timestamp in nanoseconds, shared by gyro and frame data.
using Timestamp = std::int64_t;

struct GyroSample {
  Timestamp t = 0;
  Eigen::Vector3d omega = Eigen::Vector3d::Zero(); ///< rad/s, sensor frame
};

/// Unit quaternion for the rotation vector `v` (axis * angle).
template <typename Scalar>
Eigen::Quaternion<Scalar> exp_rotation(const Eigen::Matrix<Scalar, 3, 1> &v) {
  const Scalar angle = v.norm();
  if (angle < Scalar(1e-12)) {
    // Second-order series keeps tiny steps accurate.
    Eigen::Quaternion<Scalar> q(Scalar(1) - angle * angle / Scalar(8), v.x() / Scalar(2),
                                v.y() / Scalar(2), v.z() / Scalar(2));
    return q.normalized();
  }
  return Eigen::Quaternion<Scalar>(Eigen::AngleAxis<Scalar>(angle, v / angle));
}

/// Rotation angle in [0, pi] taking q0 to q1.
template <typename Scalar>
Scalar angle_between(const Eigen::Quaternion<Scalar> &q0, const Eigen::Quaternion<Scalar> &q1) {
  const Eigen::Quaternion<Scalar> d = q0.conjugate() * q1;
  return Scalar(2) * std::atan2(d.vec().norm(), std::abs(d.w()));
}

/*
 * Spherical linear interpolation on the shorter arc.
 *
 * Endpoints are returned exactly (u == 0 gives q0, u == 1 gives q1 with its
 * original sign). The arc angle is taken from atan2 of chord lengths, which
 * stays accurate both for nearly identical and for widely separated inputs.
 */
template <typename Scalar>
Eigen::Quaternion<Scalar> slerp(const Eigen::Quaternion<Scalar> &q0,
                                const Eigen::Quaternion<Scalar> &q1, Scalar u) {
  if (std::abs(q0.norm() - Scalar(1)) > Scalar(1e-6) || std::abs(q1.norm() - Scalar(1)) > Scalar(1e-6)) {
    throw std::invalid_argument("slerp: quaternions must have unit norm");
  }
  if (!(u >= Scalar(0) && u <= Scalar(1))) {
    throw std::invalid_argument("slerp: fraction must lie in [0, 1]");
  }
  if (u == Scalar(0)) {
    return q0;
  }
  if (u == Scalar(1)) {
    return q1;
  }

  Eigen::Matrix<Scalar, 4, 1> a = q0.coeffs();
  Eigen::Matrix<Scalar, 4, 1> b = q1.coeffs();
  if (a.dot(b) < Scalar(0)) {
    b = -b;
  }
  // Half the 4D arc between a and b.
  const Scalar omega = Scalar(2) * std::atan2((b - a).norm(), (b + a).norm());
  Eigen::Matrix<Scalar, 4, 1> c;
  if (omega < Scalar(1e-9)) {
    c = (Scalar(1) - u) * a + u * b;
  } else {
    const Scalar s = std::sin(omega);
    c = (std::sin((Scalar(1) - u) * omega) / s) * a + (std::sin(u * omega) / s) * b;
  }
  Eigen::Quaternion<Scalar> out(c(3), c(0), c(1), c(2));
  out.normalize();
  return out;
}

/*
 * Integrated device orientation as timestamped unit quaternions.
 *
 * Each knot rotates sensor-frame vectors at its timestamp into the sensor
 * frame at the trajectory reference time (the first knot is the identity
 * after integration). Immutable once constructed.
 */
class OrientationTrajectory {
public:
  struct Knot {
    Timestamp t = 0;
    Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  };

  explicit OrientationTrajectory(std::vector<Knot> knots);

  [[nodiscard]] const std::vector<Knot> &knots() const { return knots_; }
  [[nodiscard]] Timestamp start() const { return knots_.front().t; }
  [[nodiscard]] Timestamp end() const { return knots_.back().t; }
  [[nodiscard]] bool covers(Timestamp from, Timestamp to) const {
    return from >= start() && to <= end();
  }

  /// SLERP between the bounding knots; throws std::out_of_range outside the span.
  [[nodiscard]] Eigen::Quaterniond at(Timestamp t) const;

  /// Same trajectory expressed against a different reference frame.
  [[nodiscard]] OrientationTrajectory pre_rotated(const Eigen::Quaterniond &q) const;

private:
  std::vector<Knot> knots_;
};

/*
 * Integrates angular rates into an orientation trajectory, one knot per
 * sample. Each step uses the mean of the two bounding rates over the interval
 * and applies it through the quaternion exponential.
 */
OrientationTrajectory integrate_gyro(std::span<const GyroSample> samples);

inline Eigen::Quaterniond orientation_at(const OrientationTrajectory &traj, Timestamp t) {
  return traj.at(t);
}

/*
 * Rotation of the sensor between two instants, as the matrix mapping a fixed
 * scene direction seen in the sensor frame at `from` to the same direction in
 * the sensor frame at `to`.
 */
Eigen::Matrix3d relative_rotation(const OrientationTrajectory &traj, Timestamp from, Timestamp to);

/// CSV with header `t_ns,wx,wy,wz`; rows must be strictly increasing in time.
std::vector<GyroSample> load_imu_csv(const std::filesystem::path &path);
void save_imu_csv(std::span<const GyroSample> samples, const std::filesystem::path &path);

} // namespace gyrodeblur
