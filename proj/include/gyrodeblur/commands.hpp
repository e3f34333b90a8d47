#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gyrodeblur/blurfield.hpp"
#include "gyrodeblur/deconv.hpp"
#include "gyrodeblur/imu.hpp"
#include "gyrodeblur/validation.hpp"

namespace gyrodeblur {

/// Directory searched for cached kernel banks when no explicit bank file is given.
inline constexpr const char *kBankDirEnv = "GYRODEBLUR_BANK_DIR";

struct DeblurOptions {
  std::filesystem::path input;
  std::filesystem::path camera;
  std::filesystem::path imu;
  std::filesystem::path output;
  std::optional<std::filesystem::path> field_csv;
  std::optional<std::filesystem::path> bank_file;
  int block = 64;
  ValidationConfig validation;
  double gamma = kDefaultGamma;
  int r_max = 95;
  unsigned threads = 0;
};

struct DeblurStats {
  std::size_t cells = 0;
  std::size_t valid = 0;
  std::size_t invalid = 0;
  std::size_t clamped = 0;
  double mean_extent = 0.0;
  double wall_ms = 0.0;
  BlurField field;
};

/// Field estimation, validation and deblurring of one frame; writes the output image.
DeblurStats run_deblur(const DeblurOptions &opts);

/*
 * Kernel bank for (r_max, gamma): read from `explicit_file` when given,
 * otherwise from the cache directory named by GYRODEBLUR_BANK_DIR (built and
 * stored there on a miss), otherwise built in memory.
 */
KernelBank obtain_bank(int r_max, double gamma, const std::optional<std::filesystem::path> &explicit_file,
                       unsigned threads);

struct SynthOptions {
  std::filesystem::path input;
  std::filesystem::path out_image;
  std::filesystem::path out_imu;
  std::filesystem::path out_camera;
  double theta_deg = 0.0;
  int extent = 1;
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
  Timestamp exposure_ns = 30'000'000;
  Timestamp readout_ns = 20'000'000;
  /// Focal length in pixels; 0 picks 1.2 * max(width, height).
  double focal_px = 0.0;
  unsigned threads = 0;
};

/// Camera for a width x height frame with the principal point at the image center.
CameraRig synth_camera(int width, int height, Timestamp exposure_ns, Timestamp readout_ns, double focal_px);

/*
 * Constant-rate gyro trace whose rotation over one exposure moves the
 * principal point by `extent` px along theta_deg. Sampled at 200 Hz with
 * 10 ms of margin on both sides of the frame.
 */
std::vector<GyroSample> synth_trace(const CameraRig &rig, double theta_deg, double extent);

void run_synth(const SynthOptions &opts);

struct EvalRow {
  std::string pair;
  double rep = 0.0;
  std::optional<double> loc_err;
  std::size_t matches = 0;
  std::size_t count = 0;
};

struct EvalOptions {
  std::filesystem::path a;
  std::filesystem::path b;
  std::filesystem::path homography;
  std::string pair = "pair";
  std::size_t count = 500;
  double overlap = 0.4;
};

/// Truncates both keypoint sets to `count` and scores them.
EvalRow evaluate_pair(const EvalOptions &opts);

/*
 * Scores every pair of a manifest CSV `pair,a,b,homography` (relative paths
 * resolve against the manifest's directory) and appends an `avg.` row.
 */
std::vector<EvalRow> evaluate_batch(const std::filesystem::path &manifest, std::size_t count, double overlap);

/// Report CSV `pair,rep,loc_err,matches,count`; a missing loc_err is left empty.
void write_eval_report(const std::vector<EvalRow> &rows, const std::filesystem::path &path, bool append);

struct FieldOptions {
  std::filesystem::path camera;
  std::filesystem::path imu;
  std::filesystem::path csv;
  std::optional<std::filesystem::path> preview;
  int block = 64;
  unsigned threads = 0;
};

/// Black image with each cell's blur drawn as a white segment centered on the cell.
Image render_field_preview(const BlurField &field);

BlurField run_field(const FieldOptions &opts);

struct RectifyOptions {
  std::filesystem::path keypoints;
  std::filesystem::path camera;
  std::filesystem::path imu;
  std::filesystem::path output;
  /// When set, the frame is validated and keypoints in rejected cells stay put.
  std::optional<std::filesystem::path> image;
  int block = 64;
  ValidationConfig validation;
  unsigned threads = 0;
};

void run_rectify(const RectifyOptions &opts);

struct BankReport {
  std::size_t kernels = 0;
  std::size_t max_elements = 0;
};

BankReport run_bank(int r_max, double gamma, const std::filesystem::path &out, unsigned threads);

} // namespace gyrodeblur
