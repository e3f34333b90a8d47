#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gyrodeblur/imu.hpp"
#include "gyrodeblur/keypoint.hpp"

namespace gyrodeblur {

/// Pixel coordinates, origin at the top-left pixel center, x right, y down.
using ImagePoint = Eigen::Vector2d;

/// Pinhole intrinsics plus rolling-shutter timing of one frame.
struct CameraRig {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1; ///< row count N
  Timestamp readout_ns = 0;
  Timestamp exposure_ns = 1;
  Timestamp frame_ts_ns = 0; ///< start of first-row exposure
  /// Signed permutation taking gyro-frame vectors to camera-frame vectors.
  Eigen::Matrix3d gyro_to_camera = Eigen::Matrix3d::Identity();

  /// Throws std::invalid_argument on any violated field constraint.
  void validate() const;
  [[nodiscard]] Eigen::Matrix3d intrinsics() const;
  [[nodiscard]] Eigen::Matrix3d intrinsics_inverse() const;
};

/// JSON keys: fx, fy, cx, cy, width, height, readout_ns, exposure_ns,
/// frame_ts_ns and optional gyro_to_camera (9 numbers, row-major).
CameraRig load_camera_json(const std::filesystem::path &path);
void save_camera_json(const CameraRig &rig, const std::filesystem::path &path);

/// Linear blur: orientation in degrees folded to [0, 180), extent in pixels.
struct BlurVector {
  double theta_deg = 0.0;
  double extent = 0.0;
};

enum class CellStatus : std::uint8_t {
  valid,            ///< deblur this block and rectify its keypoints
  below_min_extent, ///< nothing to deblur, geometry still trusted
  rejected,         ///< image gradients contradict the gyro estimate
};

struct BlurCell {
  BlurVector blur;
  CellStatus status = CellStatus::valid;

  [[nodiscard]] bool valid() const { return status == CellStatus::valid; }
};

struct BlockRect {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

/// Per-block blur estimates over an image; the last row/column of blocks may be smaller.
class BlurField {
public:
  BlurField() = default;
  BlurField(int image_width, int image_height, int block_w, int block_h);

  [[nodiscard]] int image_width() const { return width_; }
  [[nodiscard]] int image_height() const { return height_; }
  [[nodiscard]] int block_w() const { return block_w_; }
  [[nodiscard]] int block_h() const { return block_h_; }
  [[nodiscard]] int grid_cols() const { return grid_cols_; }
  [[nodiscard]] int grid_rows() const { return grid_rows_; }
  [[nodiscard]] std::size_t size() const { return cells_.size(); }

  [[nodiscard]] BlurCell &cell(int col, int row) { return cells_[index(col, row)]; }
  [[nodiscard]] const BlurCell &cell(int col, int row) const { return cells_[index(col, row)]; }
  [[nodiscard]] std::vector<BlurCell> &cells() { return cells_; }
  [[nodiscard]] const std::vector<BlurCell> &cells() const { return cells_; }

  [[nodiscard]] BlockRect block(int col, int row) const;
  /// Center pixel of a block, (x0 + x1 - 1) / 2 along each axis.
  [[nodiscard]] ImagePoint center(int col, int row) const;
  /// Column and row of the block containing a point (clamped to the grid).
  [[nodiscard]] std::pair<int, int> locate(double x, double y) const;

  [[nodiscard]] std::size_t count(CellStatus status) const;

private:
  [[nodiscard]] std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(grid_cols_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  int block_w_ = 0;
  int block_h_ = 0;
  int grid_cols_ = 0;
  int grid_rows_ = 0;
  std::vector<BlurCell> cells_;
};

/// Exposure start of row y: t_f + t_r * y / N, rounded to the nearest ns.
Timestamp row_start_time(const CameraRig &rig, double y);

/*
 * Where the scene point imaged at p when its row starts exposing is imaged
 * when that row stops exposing: x' = K R K^-1 x with R the camera-frame
 * relative rotation over [t1(y), t1(y) + t_e].
 */
ImagePoint map_point_across_exposure(const CameraRig &rig, const OrientationTrajectory &traj,
                                     const ImagePoint &p);

BlurVector blur_vector_from_displacement(const ImagePoint &p, const ImagePoint &p2);

/// Blur vector at every block center. Cells start out valid.
BlurField estimate_blur_field(const CameraRig &rig, const OrientationTrajectory &traj, int block_w,
                              int block_h, unsigned threads = 0);

/*
 * Moves each keypoint to where it would be imaged at the first-row exposure
 * start t_f, undoing rolling-shutter skew. With a field, keypoints lying in
 * rejected cells are returned unchanged. Scale and response are preserved.
 */
std::vector<Keypoint> rectify_keypoints(const CameraRig &rig, const OrientationTrajectory &traj,
                                        const std::vector<Keypoint> &kps,
                                        const BlurField *field = nullptr);

/// CSV `col,row,theta_deg,extent_px,valid`.
void write_field_csv(const BlurField &field, const std::filesystem::path &path);

} // namespace gyrodeblur
