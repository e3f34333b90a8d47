#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "gyrodeblur/imu.hpp"

using namespace gyrodeblur;
using Eigen::Quaterniond;
using Eigen::Vector3d;

namespace {

constexpr double kPi = std::numbers::pi;

Quaterniond axis_angle(double deg, const Vector3d &axis) {
  return Quaterniond(Eigen::AngleAxisd(deg * kPi / 180.0, axis.normalized()));
}

// Rotation angle between two orientations, insensitive to quaternion sign.
double rot_dist(const Quaterniond &a, const Quaterniond &b) {
  return Eigen::AngleAxisd(a.conjugate() * b).angle();
}

std::vector<GyroSample> sampled(double hz, double seconds, const std::function<Vector3d(double)> &omega) {
  std::vector<GyroSample> out;
  const auto n = static_cast<int>(std::lround(hz * seconds));
  for (int i = 0; i <= n; ++i) {
    const Timestamp t = std::llround(i * 1e9 / hz);
    out.push_back({t, omega(static_cast<double>(t) * 1e-9)});
  }
  return out;
}

Quaterniond random_unit(std::mt19937_64 &rng) {
  std::normal_distribution<double> n;
  Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

} // namespace

TEST_CASE("integrate_gyro: zero rate gives identity everywhere") {
  const auto samples = sampled(100, 0.5, [](double) { return Vector3d::Zero(); });
  const auto traj = integrate_gyro(samples);
  REQUIRE(traj.knots().size() == samples.size());
  for (const auto &k : traj.knots()) {
    CHECK(rot_dist(k.q, Quaterniond::Identity()) == 0.0);
  }
}

TEST_CASE("integrate_gyro: constant rate about z reaches 90 degrees after 1 s") {
  const auto samples = sampled(100, 1.0, [](double) { return Vector3d(0, 0, kPi / 2); });
  const auto traj = integrate_gyro(samples);
  CHECK(rot_dist(traj.knots().back().q, axis_angle(90, Vector3d::UnitZ())) < 1e-6);
}

TEST_CASE("integrate_gyro: analytic rate matches a 10 us brute-force integrator") {
  auto omega = [](double t) { return Vector3d(0, std::sin(t), 0); };
  const auto traj = integrate_gyro(sampled(100, 0.03, omega));

  // Oracle: right-multiplied rotation matrices over 10 us steps, rate at step midpoint.
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  const double h = 10e-6;
  for (int i = 0; i < 3000; ++i) {
    const Vector3d w = omega((i + 0.5) * h) * h;
    r = r * Eigen::AngleAxisd(w.norm(), w.norm() > 0 ? Vector3d(w.normalized()) : Vector3d::UnitX()).toRotationMatrix();
  }
  CHECK(rot_dist(traj.knots().back().q, Quaterniond(r)) < 1e-7);
  // Fixed axis, so the closed form angle is also available.
  CHECK(rot_dist(traj.knots().back().q, Quaterniond(Eigen::AngleAxisd(1.0 - std::cos(0.03), Vector3d::UnitY()))) <
        1e-7);
}

TEST_CASE("integrate_gyro: errors") {
  std::vector<GyroSample> one{{0, Vector3d::Zero()}};
  CHECK_THROWS_AS(integrate_gyro(one), std::invalid_argument);
  std::vector<GyroSample> backwards{{10, Vector3d::Zero()}, {5, Vector3d::Zero()}};
  CHECK_THROWS_AS(integrate_gyro(backwards), std::invalid_argument);
  std::vector<GyroSample> repeated{{10, Vector3d::Zero()}, {10, Vector3d::Zero()}};
  CHECK_THROWS_AS(integrate_gyro(repeated), std::invalid_argument);
  std::vector<GyroSample> nan{{0, Vector3d::Zero()}, {5, Vector3d(NAN, 0, 0)}};
  CHECK_THROWS_AS(integrate_gyro(nan), std::invalid_argument);
}

TEST_CASE("orientation_at: knots, closed-form midpoints and span errors") {
  const OrientationTrajectory traj({{0, Quaterniond::Identity()}, {1000, axis_angle(90, Vector3d::UnitZ())}});
  CHECK(orientation_at(traj, 0).coeffs() == Quaterniond::Identity().coeffs());
  CHECK(orientation_at(traj, 1000).coeffs() == axis_angle(90, Vector3d::UnitZ()).coeffs());
  CHECK(rot_dist(orientation_at(traj, 500), axis_angle(45, Vector3d::UnitZ())) < 1e-9);
  CHECK(rot_dist(orientation_at(traj, 250), axis_angle(22.5, Vector3d::UnitZ())) < 1e-9);
  CHECK_THROWS_AS((void)orientation_at(traj, -1), std::out_of_range);
  CHECK_THROWS_AS((void)orientation_at(traj, 1001), std::out_of_range);
}

TEST_CASE("OrientationTrajectory rejects non-unit or unordered knots") {
  CHECK_THROWS_AS(OrientationTrajectory({{0, Quaterniond(1.0 + 1e-6, 0, 0, 0)}}), std::invalid_argument);
  CHECK_THROWS_AS(OrientationTrajectory({{5, Quaterniond::Identity()}, {5, Quaterniond::Identity()}}),
                  std::invalid_argument);
}

TEST_CASE("slerp: endpoints and the near-antipodal half-way point") {
  const Quaterniond q0 = axis_angle(10, Vector3d(1, 2, 3));
  const Quaterniond q1 = axis_angle(70, Vector3d(-1, 0, 2));
  CHECK(slerp(q0, q1, 0.0).coeffs() == q0.coeffs());
  CHECK(slerp(q0, q1, 1.0).coeffs() == q1.coeffs());

  const double eps = 1e-3;
  const Quaterniond q_far = axis_angle(180.0 - eps, Vector3d::UnitX());
  const Quaterniond half = slerp(Quaterniond::Identity(), q_far, 0.5);
  CHECK(rot_dist(half, axis_angle(90.0 - eps / 2, Vector3d::UnitX())) < 1e-9);
}

TEST_CASE("slerp: shorter arc when the quaternions have opposite sign") {
  const Quaterniond q0 = Quaterniond::Identity();
  Quaterniond q1 = axis_angle(40, Vector3d::UnitY());
  q1.coeffs() *= -1.0;
  CHECK(rot_dist(slerp(q0, q1, 0.5), axis_angle(20, Vector3d::UnitY())) < 1e-9);
}

TEST_CASE("slerp: errors") {
  const Quaterniond q = Quaterniond::Identity();
  CHECK_THROWS_AS(slerp(q, Quaterniond(1.1, 0, 0, 0), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(slerp(q, q, -0.01), std::invalid_argument);
  CHECK_THROWS_AS(slerp(q, q, 1.01), std::invalid_argument);
}

TEST_CASE("slerp: angle from q0 is u times the arc for random pairs") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const Quaterniond q0 = random_unit(rng);
    const Quaterniond q1 = random_unit(rng);
    const double u = uni(rng);
    const Quaterniond q = slerp(q0, q1, u);
    CHECK(std::abs(q.norm() - 1.0) <= 1e-12);
    CHECK(std::abs(rot_dist(q0, q) - u * rot_dist(q0, q1)) < 1e-9);
  }
}

TEST_CASE("integrate_gyro: norms stay unit after 1000 random steps") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rate(-5.0, 5.0);
  std::vector<GyroSample> samples;
  for (int i = 0; i <= 1000; ++i) {
    samples.push_back({static_cast<Timestamp>(i) * 5'000'000, Vector3d(rate(rng), rate(rng), rate(rng))});
  }
  const auto traj = integrate_gyro(samples);
  for (const auto &k : traj.knots()) {
    CHECK(std::abs(k.q.norm() - 1.0) <= 1e-9);
  }
}

TEST_CASE("integrate_gyro: splitting a trace and composing matches the whole") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> rate(-3.0, 3.0);
  std::vector<GyroSample> samples;
  for (int i = 0; i <= 200; ++i) {
    samples.push_back({static_cast<Timestamp>(i) * 2'500'000, Vector3d(rate(rng), rate(rng), rate(rng))});
  }
  const auto whole = integrate_gyro(samples);
  const std::span<const GyroSample> all(samples);
  const auto first = integrate_gyro(all.subspan(0, 81));
  const auto second = integrate_gyro(all.subspan(80));
  const Quaterniond composed = first.knots().back().q * second.knots().back().q;
  CHECK(rot_dist(whole.knots().back().q, composed) < 1e-9);
}

TEST_CASE("relative rotation is invariant to the trajectory reference") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rate(-2.0, 2.0);
  std::vector<GyroSample> samples;
  for (int i = 0; i <= 50; ++i) {
    samples.push_back({static_cast<Timestamp>(i) * 10'000'000, Vector3d(rate(rng), rate(rng), rate(rng))});
  }
  const auto traj = integrate_gyro(samples);
  const auto moved = traj.pre_rotated(random_unit(rng));
  for (Timestamp t1 : {Timestamp{3'000'000}, Timestamp{120'000'000}}) {
    for (Timestamp t2 : {Timestamp{77'777'777}, Timestamp{499'000'000}}) {
      const Eigen::Matrix3d a = relative_rotation(traj, t1, t2);
      const Eigen::Matrix3d b = relative_rotation(moved, t1, t2);
      CHECK(Eigen::AngleAxisd(a.transpose() * b).angle() < 1e-9);
    }
  }
}

TEST_CASE("IMU CSV round trip and unsorted rejection") {
  const auto dir = std::filesystem::temp_directory_path() / "gyrodeblur_test_imu";
  std::filesystem::create_directories(dir);
  std::vector<GyroSample> samples{{0, Vector3d(0.1, -0.2, 0.3)}, {5'000'000, Vector3d(1e-9, 2.5, -7)}};
  save_imu_csv(samples, dir / "trace.csv");
  const auto back = load_imu_csv(dir / "trace.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].t == 5'000'000);
  CHECK(back[1].omega == samples[1].omega);

  std::ofstream(dir / "bad.csv") << "t_ns,wx,wy,wz\n10,0,0,0\n5,0,0,0\n";
  CHECK_THROWS(load_imu_csv(dir / "bad.csv"));
  std::ofstream(dir / "header.csv") << "t,wx,wy,wz\n10,0,0,0\n";
  CHECK_THROWS(load_imu_csv(dir / "header.csv"));
}
