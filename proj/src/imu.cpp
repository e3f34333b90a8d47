#include "gyrodeblur/imu.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <string>

namespace gyrodeblur {

OrientationTrajectory::OrientationTrajectory(std::vector<Knot> knots) : knots_(std::move(knots)) {
  if (knots_.empty()) {
    throw std::invalid_argument("trajectory needs at least one knot");
  }
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (std::abs(knots_[i].q.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("trajectory knot " + std::to_string(i) + " is not a unit quaternion");
    }
    if (i > 0 && knots_[i].t <= knots_[i - 1].t) {
      throw std::invalid_argument("trajectory knot timestamps must be strictly increasing");
    }
  }
}

Eigen::Quaterniond OrientationTrajectory::at(Timestamp t) const {
  if (t < start() || t > end()) {
    throw std::out_of_range("timestamp " + std::to_string(t) + " outside trajectory [" +
                            std::to_string(start()) + ", " + std::to_string(end()) + "]");
  }
  const auto upper = std::lower_bound(knots_.begin(), knots_.end(), t,
                                      [](const Knot &k, Timestamp v) { return k.t < v; });
  if (upper->t == t) {
    return upper->q;
  }
  const auto lower = std::prev(upper);
  const double u = static_cast<double>(t - lower->t) / static_cast<double>(upper->t - lower->t);
  return slerp(lower->q, upper->q, u);
}

OrientationTrajectory OrientationTrajectory::pre_rotated(const Eigen::Quaterniond &q) const {
  std::vector<Knot> out = knots_;
  for (auto &k : out) {
    k.q = (q * k.q).normalized();
  }
  return OrientationTrajectory(std::move(out));
}

OrientationTrajectory integrate_gyro(std::span<const GyroSample> samples) {
  if (samples.size() < 2) {
    throw std::invalid_argument("integrate_gyro needs at least 2 samples");
  }
  std::vector<OrientationTrajectory::Knot> knots;
  knots.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].omega.allFinite()) {
      throw std::invalid_argument("gyro sample " + std::to_string(i) + " has a non-finite rate");
    }
    if (i > 0 && samples[i].t <= samples[i - 1].t) {
      throw std::invalid_argument("gyro timestamps must be strictly increasing");
    }
  }

  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  knots.push_back({samples[0].t, q});
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double dt = static_cast<double>(samples[i].t - samples[i - 1].t) * 1e-9;
    const Eigen::Vector3d step = 0.5 * (samples[i - 1].omega + samples[i].omega) * dt;
    q = (q * exp_rotation(step)).normalized();
    knots.push_back({samples[i].t, q});
  }
  return OrientationTrajectory(std::move(knots));
}

Eigen::Matrix3d relative_rotation(const OrientationTrajectory &traj, Timestamp from, Timestamp to) {
  const Eigen::Quaterniond q_from = traj.at(from);
  const Eigen::Quaterniond q_to = traj.at(to);
  return (q_to.conjugate() * q_from).normalized().toRotationMatrix();
}

std::vector<GyroSample> load_imu_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open IMU trace " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty IMU trace " + path.string());
  }
  line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }),
             line.end());
  if (line != "t_ns,wx,wy,wz") {
    throw std::runtime_error("IMU trace header must be t_ns,wx,wy,wz");
  }

  std::vector<GyroSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    GyroSample s;
    std::string extra;
    if (!(fields >> s.t >> s.omega.x() >> s.omega.y() >> s.omega.z()) || (fields >> extra)) {
      throw std::runtime_error("malformed IMU row at line " + std::to_string(line_no));
    }
    if (!samples.empty() && s.t <= samples.back().t) {
      throw std::runtime_error("IMU rows not strictly increasing in time at line " +
                               std::to_string(line_no));
    }
    samples.push_back(s);
  }
  return samples;
}

void save_imu_csv(std::span<const GyroSample> samples, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write IMU trace " + path.string());
  }
  out << "t_ns,wx,wy,wz\n" << std::setprecision(17);
  for (const auto &s : samples) {
    out << s.t << ',' << s.omega.x() << ',' << s.omega.y() << ',' << s.omega.z() << '\n';
  }
}

} // namespace gyrodeblur
