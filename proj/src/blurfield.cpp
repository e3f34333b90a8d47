#include "gyrodeblur/blurfield.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <stdexcept>
#include <string>

#include "gyrodeblur/parallel.hpp"

namespace gyrodeblur {

namespace {

Eigen::Matrix3d camera_rotation(const CameraRig &rig, const OrientationTrajectory &traj,
                                Timestamp from, Timestamp to) {
  if (!traj.covers(std::min(from, to), std::max(from, to))) {
    throw std::out_of_range("interval [" + std::to_string(from) + ", " + std::to_string(to) +
                            "] ns is not covered by the gyro trajectory");
  }
  const Eigen::Matrix3d &p = rig.gyro_to_camera;
  return p * relative_rotation(traj, from, to) * p.transpose();
}

ImagePoint apply_rotation(const CameraRig &rig, const Eigen::Matrix3d &rotation, const ImagePoint &p) {
  const Eigen::Vector3d x = rig.intrinsics() * rotation * rig.intrinsics_inverse() * p.homogeneous();
  if (x.z() < 1e-12) {
    throw std::domain_error("mapped point is at infinity");
  }
  return x.hnormalized();
}

} // namespace

void CameraRig::validate() const {
  if (!(fx > 0.0 && fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw std::invalid_argument("camera: focal lengths must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw std::invalid_argument("camera: principal point must be finite");
  }
  if (width < 1 || height < 1) {
    throw std::invalid_argument("camera: width and height must be >= 1");
  }
  if (exposure_ns <= 0 || readout_ns < 0) {
    throw std::invalid_argument("camera: need exposure > 0 and readout >= 0");
  }
  for (int i = 0; i < 3; ++i) {
    int nonzero = 0;
    for (int j = 0; j < 3; ++j) {
      const double v = gyro_to_camera(i, j);
      if (v != 0.0 && v != 1.0 && v != -1.0) {
        throw std::invalid_argument("camera: gyro_to_camera entries must be -1, 0 or 1");
      }
      nonzero += v != 0.0;
    }
    if (nonzero != 1) {
      throw std::invalid_argument("camera: gyro_to_camera must be a signed permutation");
    }
  }
  if (!(gyro_to_camera * gyro_to_camera.transpose()).isIdentity(0.0)) {
    throw std::invalid_argument("camera: gyro_to_camera must be orthogonal");
  }
}

Eigen::Matrix3d CameraRig::intrinsics() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d CameraRig::intrinsics_inverse() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

CameraRig load_camera_json(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open camera config " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw std::runtime_error("camera config " + path.string() + ": " + e.what());
  }
  CameraRig rig;
  try {
    rig.fx = j.at("fx").get<double>();
    rig.fy = j.at("fy").get<double>();
    rig.cx = j.at("cx").get<double>();
    rig.cy = j.at("cy").get<double>();
    rig.width = j.at("width").get<int>();
    rig.height = j.at("height").get<int>();
    rig.readout_ns = j.at("readout_ns").get<Timestamp>();
    rig.exposure_ns = j.at("exposure_ns").get<Timestamp>();
    rig.frame_ts_ns = j.at("frame_ts_ns").get<Timestamp>();
    if (j.contains("gyro_to_camera")) {
      const auto m = j.at("gyro_to_camera").get<std::vector<double>>();
      if (m.size() != 9) {
        throw std::runtime_error("gyro_to_camera needs 9 numbers");
      }
      for (int i = 0; i < 9; ++i) {
        rig.gyro_to_camera(i / 3, i % 3) = m[static_cast<std::size_t>(i)];
      }
    }
  } catch (const nlohmann::json::exception &e) {
    throw std::runtime_error("camera config " + path.string() + ": " + e.what());
  }
  rig.validate();
  return rig;
}

void save_camera_json(const CameraRig &rig, const std::filesystem::path &path) {
  nlohmann::json j;
  j["fx"] = rig.fx;
  j["fy"] = rig.fy;
  j["cx"] = rig.cx;
  j["cy"] = rig.cy;
  j["width"] = rig.width;
  j["height"] = rig.height;
  j["readout_ns"] = rig.readout_ns;
  j["exposure_ns"] = rig.exposure_ns;
  j["frame_ts_ns"] = rig.frame_ts_ns;
  std::vector<double> m(9);
  for (int i = 0; i < 9; ++i) {
    m[static_cast<std::size_t>(i)] = rig.gyro_to_camera(i / 3, i % 3);
  }
  j["gyro_to_camera"] = m;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write camera config " + path.string());
  }
  out << j.dump(2) << '\n';
}

BlurField::BlurField(int image_width, int image_height, int block_w, int block_h)
    : width_(image_width), height_(image_height), block_w_(block_w), block_h_(block_h) {
  if (image_width < 1 || image_height < 1 || block_w < 1 || block_h < 1) {
    throw std::invalid_argument("blur field: dimensions must be positive");
  }
  grid_cols_ = (image_width + block_w - 1) / block_w;
  grid_rows_ = (image_height + block_h - 1) / block_h;
  cells_.assign(static_cast<std::size_t>(grid_cols_) * static_cast<std::size_t>(grid_rows_), BlurCell{});
}

BlockRect BlurField::block(int col, int row) const {
  BlockRect r;
  r.x0 = col * block_w_;
  r.y0 = row * block_h_;
  r.width = std::min(block_w_, width_ - r.x0);
  r.height = std::min(block_h_, height_ - r.y0);
  return r;
}

ImagePoint BlurField::center(int col, int row) const {
  const BlockRect r = block(col, row);
  return {r.x0 + (r.width - 1) / 2.0, r.y0 + (r.height - 1) / 2.0};
}

std::pair<int, int> BlurField::locate(double x, double y) const {
  const int col = std::clamp(static_cast<int>(std::floor(x / block_w_)), 0, grid_cols_ - 1);
  const int row = std::clamp(static_cast<int>(std::floor(y / block_h_)), 0, grid_rows_ - 1);
  return {col, row};
}

std::size_t BlurField::count(CellStatus status) const {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [&](const BlurCell &c) { return c.status == status; }));
}

Timestamp row_start_time(const CameraRig &rig, double y) {
  if (!(y >= 0.0 && y <= static_cast<double>(rig.height))) {
    throw std::out_of_range("row " + std::to_string(y) + " outside [0, " + std::to_string(rig.height) + "]");
  }
  const double offset = static_cast<double>(rig.readout_ns) * y / static_cast<double>(rig.height);
  return rig.frame_ts_ns + std::llround(offset);
}

ImagePoint map_point_across_exposure(const CameraRig &rig, const OrientationTrajectory &traj,
                                     const ImagePoint &p) {
  const Timestamp t1 = row_start_time(rig, p.y());
  const Timestamp t2 = t1 + rig.exposure_ns;
  return apply_rotation(rig, camera_rotation(rig, traj, t1, t2), p);
}

BlurVector blur_vector_from_displacement(const ImagePoint &p, const ImagePoint &p2) {
  if (!p.allFinite() || !p2.allFinite()) {
    throw std::invalid_argument("blur vector: non-finite point");
  }
  const Eigen::Vector2d d = p2 - p;
  BlurVector b;
  b.extent = d.norm();
  if (b.extent < 1e-9) {
    return {0.0, b.extent};
  }
  double theta = std::atan2(d.y(), d.x()) * 180.0 / std::numbers::pi;
  theta = std::fmod(theta, 180.0);
  if (theta < 0.0) {
    theta += 180.0;
  }
  if (theta >= 180.0) {
    theta = 0.0;
  }
  b.theta_deg = theta;
  return b;
}

BlurField estimate_blur_field(const CameraRig &rig, const OrientationTrajectory &traj, int block_w,
                              int block_h, unsigned threads) {
  rig.validate();
  if (block_w < 8 || block_h < 8) {
    throw std::invalid_argument("blur field: block size must be at least 8 px");
  }
  const Timestamp first = rig.frame_ts_ns;
  const Timestamp last = rig.frame_ts_ns + rig.readout_ns + rig.exposure_ns;
  if (!traj.covers(first, last)) {
    throw std::out_of_range("gyro trajectory [" + std::to_string(traj.start()) + ", " +
                            std::to_string(traj.end()) + "] does not cover the frame exposure [" +
                            std::to_string(first) + ", " + std::to_string(last) + "]");
  }

  BlurField field(rig.width, rig.height, block_w, block_h);
  parallel_for(field.size(), threads, [&](std::size_t i) {
    const int col = static_cast<int>(i % static_cast<std::size_t>(field.grid_cols()));
    const int row = static_cast<int>(i / static_cast<std::size_t>(field.grid_cols()));
    const ImagePoint c = field.center(col, row);
    field.cells()[i].blur = blur_vector_from_displacement(c, map_point_across_exposure(rig, traj, c));
  });
  return field;
}

std::vector<Keypoint> rectify_keypoints(const CameraRig &rig, const OrientationTrajectory &traj,
                                        const std::vector<Keypoint> &kps, const BlurField *field) {
  std::vector<Keypoint> out = kps;
  for (auto &kp : out) {
    if (field != nullptr) {
      const auto [col, row] = field->locate(kp.x, kp.y);
      if (field->cell(col, row).status == CellStatus::rejected) {
        continue;
      }
    }
    const Timestamp t1 = row_start_time(rig, kp.y);
    const ImagePoint p =
        apply_rotation(rig, camera_rotation(rig, traj, t1, rig.frame_ts_ns), ImagePoint(kp.x, kp.y));
    kp.x = p.x();
    kp.y = p.y();
  }
  return out;
}

void write_field_csv(const BlurField &field, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write field CSV " + path.string());
  }
  out << "col,row,theta_deg,extent_px,valid\n" << std::setprecision(10);
  for (int row = 0; row < field.grid_rows(); ++row) {
    for (int col = 0; col < field.grid_cols(); ++col) {
      const BlurCell &c = field.cell(col, row);
      out << col << ',' << row << ',' << c.blur.theta_deg << ',' << c.blur.extent << ','
          << (c.valid() ? 1 : 0) << '\n';
    }
  }
}

} // namespace gyrodeblur
