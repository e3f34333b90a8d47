// Acceptance checks: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance --only N   run criterion N alone
//
// Exit status is 0 only when every criterion that ran passed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "gyrodeblur/blurfield.hpp"
#include "gyrodeblur/commands.hpp"
#include "gyrodeblur/deconv.hpp"
#include "gyrodeblur/eval.hpp"
#include "gyrodeblur/image.hpp"
#include "gyrodeblur/imu.hpp"
#include "gyrodeblur/synth.hpp"
#include "gyrodeblur/validation.hpp"

using namespace gyrodeblur;
namespace fs = std::filesystem;

namespace {

constexpr double kGamma = 0.01;

const std::vector<std::string> kCorpus{"astronaut", "brick",  "camera", "chelsea",
                                       "coffee",    "grass",  "gravel", "rocket"};

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename... Args>
std::string fmt(const char *f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Image corpus_image(const std::string &name) { return load_image(fs::path(TEST_DATA_DIR) / (name + ".pgm")); }

BlurField uniform_field(const Image &img, int block, BlurVector b) {
  BlurField f(static_cast<int>(img.cols()), static_cast<int>(img.rows()), block, block);
  for (auto &c : f.cells()) {
    c.blur = b;
  }
  return f;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Per-block standard deviation above 0.05 on the sharp image.
std::vector<bool> textured_cells(const Image &sharp, const BlurField &field) {
  std::vector<bool> out;
  for (int row = 0; row < field.grid_rows(); ++row) {
    for (int col = 0; col < field.grid_cols(); ++col) {
      const BlockRect r = field.block(col, row);
      const Eigen::ArrayXXd b = sharp.block(r.y0, r.x0, r.height, r.width).cast<double>();
      out.push_back(std::sqrt((b - b.mean()).square().mean()) > 0.05);
    }
  }
  return out;
}

double valid_fraction(const BlurField &field, const std::vector<bool> &textured) {
  std::size_t n = 0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (textured[i]) {
      ++n;
      valid += field.cells()[i].valid() ? 1 : 0;
    }
  }
  return n == 0 ? 0.0 : static_cast<double>(valid) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

// Spatial engine against the frequency-domain reference on a uniform blur.
Verdict criterion_1() {
  const Image sharp = corpus_image("camera");
  const int r = 31;
  const Image blurred = synth_blur(sharp, 20.0, r, 0, std::nullopt);
  const KernelBank bank = build_bank(r, kGamma);

  const Stopwatch clock;
  const BlurField field = uniform_field(blurred, static_cast<int>(blurred.cols()), {20.0, r});
  const Image spatial = deblur_image(blurred, field, bank, 1).image;
  const double runtime = clock.seconds();

  const Imaged reference = frequency_wiener_reference(Imaged(blurred.cast<double>()), 20.0, r, kGamma)
                               .cwiseMax(0.0)
                               .cwiseMin(1.0);
  const int m = 2 * r;
  const Eigen::Index h = sharp.rows() - 2 * m;
  const Eigen::Index w = sharp.cols() - 2 * m;
  const double diff =
      (spatial.block(m, m, h, w).cast<double>() - reference.block(m, m, h, w)).abs().maxCoeff();
  return {diff <= 1e-3 && runtime < 10.0,
          fmt("max_abs_diff=%.4g (tol 1e-3) runtime=%.2fs (limit 10s)", diff, runtime)};
}

// Bank-wide DC gain.
Verdict criterion_2() {
  const Stopwatch clock;
  const KernelBank bank = build_bank(95, kGamma);
  double worst = 0.0;
  for (const auto &k : bank.kernels()) {
    worst = std::max(worst, std::abs(k.kernel.sum() - 1.0 / (1.0 + kGamma)));
  }
  const double runtime = clock.seconds();
  return {bank.size() == 16920 && worst <= 1e-6 && runtime < 60.0,
          fmt("kernels=%zu worst_dc_error=%.3g (tol 1e-6) runtime=%.2fs (limit 60s)", bank.size(), worst,
              runtime)};
}

struct RoundTrip {
  std::string name;
  double theta = 0;
  int extent = 0;
  Image sharp;
  Image blurred;
  Image deblurred;
};

std::vector<RoundTrip> round_trips() {
  const KernelBank bank = build_bank(47, kGamma);
  std::vector<RoundTrip> out;
  std::uint64_t seed = 1;
  for (const auto &name : kCorpus) {
    for (const auto &[theta, r] : {std::pair{30.0, 27}, std::pair{110.0, 47}}) {
      RoundTrip t{name, theta, r, corpus_image(name), {}, {}};
      t.blurred = synth_blur(t.sharp, theta, r, seed++, 30.0);
      t.deblurred = deblur_image(t.blurred, uniform_field(t.blurred, 64, {theta, static_cast<double>(r)}), bank)
                        .image;
      out.push_back(std::move(t));
    }
  }
  return out;
}

// True-parameter deblurring improves PSNR on every image and condition.
Verdict criterion_3() {
  bool pass = true;
  double worst_gain = 1e9;
  std::string worst;
  for (const auto &t : round_trips()) {
    const double gain = psnr(t.deblurred, t.sharp) - psnr(t.blurred, t.sharp);
    pass = pass && gain > 0.0;
    if (gain < worst_gain) {
      worst_gain = gain;
      worst = fmt("%s theta=%.0f r=%d", t.name.c_str(), t.theta, t.extent);
    }
  }
  return {pass, fmt("16 runs, smallest PSNR gain %+.2f dB (%s)", worst_gain, worst.c_str())};
}

// Fixed Harris threshold: the sharp corpus yields a median of about 500
// detections, the count used for repeatability scoring.
constexpr double kDetectThreshold = 3e-6;

Verdict criterion_4() {
  ToyDetectorOptions opts;
  opts.threshold = kDetectThreshold;
  std::vector<double> before;
  std::vector<double> after;
  for (const auto &t : round_trips()) {
    before.push_back(static_cast<double>(toy_detect(t.blurred, opts).size()));
    after.push_back(static_cast<double>(toy_detect(t.deblurred, opts).size()));
  }
  const double mb = median(before);
  const double ma = median(after);
  return {ma >= 1.3 * mb && ma > 0.0,
          fmt("median keypoints blurred %.1f deblurred %.1f (need >= 1.3x), threshold %g", mb, ma, kDetectThreshold)};
}

// Scorer self-test on a sharp image and its warp by a known homography.
Verdict criterion_5() {
  const Image a = corpus_image("camera");
  Eigen::Matrix3d m;
  m << 0.97, 0.04, 9.0, -0.03, 1.02, -6.0, 3e-5, -2e-5, 1.0;
  const Homography h(m);
  const Image b = warp_perspective(a, h.matrix(), a.rows(), a.cols());
  const int w = static_cast<int>(a.cols());
  const int ht = static_cast<int>(a.rows());
  const auto ka = truncate_by_response(visible_in(toy_detect(a), h, w, ht, 8.0), 500);
  const auto kb = truncate_by_response(visible_in(toy_detect(b), h.inverse(), w, ht, 8.0), 500);
  const double rep = repeatability(ka, kb, h, 0.4);
  const auto err = localization_error(ka, kb, h, 0.4);
  const bool pass = rep >= 0.7 && err.has_value() && *err <= 1.0;
  return {pass, fmt("repeatability=%.3f (min 0.7) loc_err=%.3fpx (max 1) count=%zu/%zu", rep, err.value_or(-1.0),
                    ka.size(), kb.size())};
}

// Synthetic IMU round trip through the synth and deblur commands.
Verdict criterion_6() {
  const fs::path dir = fs::temp_directory_path() / "gyrodeblur_acceptance_c6";
  fs::create_directories(dir);
  const double theta = 30.0;
  const int extent = 27;

  SynthOptions s;
  s.input = fs::path(TEST_DATA_DIR) / "camera.pgm";
  s.out_image = dir / "blurred.pgm";
  s.out_imu = dir / "imu.csv";
  s.out_camera = dir / "camera.json";
  s.theta_deg = theta;
  s.extent = extent;
  run_synth(s);

  DeblurOptions d;
  d.input = s.out_image;
  d.camera = s.out_camera;
  d.imu = s.out_imu;
  d.output = dir / "deblurred.pgm";
  d.field_csv = dir / "field.csv";
  d.validation.tau = 0.3;
  d.r_max = 47;
  const DeblurStats good = run_deblur(d);

  const Image sharp = load_image(s.input);
  const auto textured = textured_cells(sharp, good.field);
  const auto [col, row] = good.field.locate((sharp.cols() - 1) / 2.0, (sharp.rows() - 1) / 2.0);
  const BlurVector center = good.field.cell(col, row).blur;
  const double dtheta = std::abs(center.theta_deg - theta);
  const double angle_err = std::min(dtheta, 180.0 - dtheta);
  const double extent_err = std::abs(center.extent - extent);
  const double kept = valid_fraction(good.field, textured);

  // Same frame, gyro trace for a blur rotated by 90 degrees.
  const CameraRig rig = load_camera_json(s.out_camera);
  save_imu_csv(synth_trace(rig, std::fmod(theta + 90.0, 180.0), extent), dir / "imu_bad.csv");
  DeblurOptions bad = d;
  bad.imu = dir / "imu_bad.csv";
  bad.output = dir / "deblurred_bad.pgm";
  bad.field_csv.reset();
  const double kept_bad = valid_fraction(run_deblur(bad).field, textured);

  const bool pass = angle_err <= 1.0 && extent_err <= 1.0 && kept >= 0.8 && kept_bad < 0.5;
  return {pass, fmt("center (%.2f deg, %.2f px) err (%.2f deg, %.2f px) (max 1, 1); textured valid %.2f (min 0.8); "
                    "corrupted %.2f (max 0.5)",
                    center.theta_deg, center.extent, angle_err, extent_err, kept, kept_bad)};
}

// Rolling-shutter timing and rectification against the single-axis model.
Verdict criterion_7() {
  CameraRig rig;
  rig.fx = 900;
  rig.fy = 905;
  rig.cx = 319.5;
  rig.cy = 239.5;
  rig.width = 640;
  rig.height = 480;
  rig.readout_ns = 30'000'000;
  rig.exposure_ns = 15'000'000;
  rig.frame_ts_ns = 40'000'000;
  const bool endpoints = row_start_time(rig, 0) == rig.frame_ts_ns &&
                         row_start_time(rig, rig.height) == rig.frame_ts_ns + rig.readout_ns;

  const double w = 0.9;
  std::vector<GyroSample> samples;
  for (int i = 0; i <= 40; ++i) {
    samples.push_back({static_cast<Timestamp>(i) * 5'000'000, Eigen::Vector3d(0, w, 0)});
  }
  const auto traj = integrate_gyro(samples);
  std::vector<Keypoint> kps;
  for (double y = 0; y < 480; y += 37.5) {
    kps.push_back({40.0 + 1.1 * y, y, 4.0, 1.0});
  }
  const auto out = rectify_keypoints(rig, traj, kps);
  double worst = 0.0;
  for (std::size_t i = 0; i < kps.size(); ++i) {
    const Timestamp t1 = row_start_time(rig, kps[i].y);
    const double a = w * static_cast<double>(t1 - rig.frame_ts_ns) * 1e-9;
    const double vx = (kps[i].x - rig.cx) / rig.fx;
    const double vy = (kps[i].y - rig.cy) / rig.fy;
    // R_y(a) applied to (vx, vy, 1).
    const double rx = std::cos(a) * vx + std::sin(a);
    const double rz = -std::sin(a) * vx + std::cos(a);
    const double ex = rig.cx + rig.fx * rx / rz;
    const double ey = rig.cy + rig.fy * vy / rz;
    worst = std::max({worst, std::abs(out[i].x - ex), std::abs(out[i].y - ey)});
  }
  return {endpoints && worst <= 1e-6,
          fmt("row endpoints %s; rectification max error %.3g px (tol 1e-6)", endpoints ? "exact" : "WRONG", worst)};
}

// Full-HD timing at mean extent 90 and thread scaling.
Verdict criterion_8() {
  const Image src = corpus_image("astronaut");
  Image img(1080, 1920);
  for (Eigen::Index y = 0; y < img.rows(); ++y) {
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      img(y, x) = sample_bilinear(src, x * (src.cols() - 1) / 1919.0, y * (src.rows() - 1) / 1079.0);
    }
  }
  BlurField field(1920, 1080, 64, 64);
  for (int row = 0; row < field.grid_rows(); ++row) {
    for (int col = 0; col < field.grid_cols(); ++col) {
      field.cell(col, row).blur = {static_cast<double>((37 * col + 11 * row) % 180), 90.0};
    }
  }
  const KernelBank bank = build_bank(95, kGamma);

  const Stopwatch t1;
  const Image one = deblur_image(img, field, bank, 1).image;
  const double single = t1.seconds();
  const Stopwatch t4;
  const Image four = deblur_image(img, field, bank, 4).image;
  const double multi = t4.seconds();
  const bool identical = (one == four).all();
  const double ratio = multi / single;
  const bool a = single <= 10.0;
  const bool b = ratio <= 0.45 && identical;
  return {a && b, fmt("(a) %s single-thread %.2fs (limit 10s); (b) %s 4-thread ratio %.2f (max 0.45), "
                      "bit-identical %s, hardware threads %u",
                      a ? "PASS" : "FAIL", single, b ? "PASS" : "FAIL", ratio, identical ? "yes" : "no",
                      std::thread::hardware_concurrency())};
}

// Quaternion integration and SLERP hygiene.
Verdict criterion_9() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> rate(-6.0, 6.0);
  std::vector<GyroSample> samples;
  for (int i = 0; i <= 1000; ++i) {
    samples.push_back({static_cast<Timestamp>(i) * 2'000'000, Eigen::Vector3d(rate(rng), rate(rng), rate(rng))});
  }
  const auto traj = integrate_gyro(samples);
  double norm_err = 0.0;
  for (const auto &k : traj.knots()) {
    norm_err = std::max(norm_err, std::abs(k.q.norm() - 1.0));
  }

  const Eigen::Quaterniond q0(Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, -2, 0.5).normalized()));
  const Eigen::Quaterniond q1 = q0 * Eigen::Quaterniond(Eigen::AngleAxisd(1.4, Eigen::Vector3d::UnitZ()));
  const Eigen::Quaterniond half = q0 * Eigen::Quaterniond(Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitZ()));
  double slerp_err = 0.0;
  slerp_err = std::max(slerp_err, angle_between(slerp(q0, q1, 0.0), q0));
  slerp_err = std::max(slerp_err, angle_between(slerp(q0, q1, 1.0), q1));
  slerp_err = std::max(slerp_err, angle_between(slerp(q0, q1, 0.5), half));
  return {norm_err <= 1e-9 && slerp_err <= 1e-9,
          fmt("max |norm-1| after 1000 steps %.3g (tol 1e-9); slerp max error %.3g rad (tol 1e-9)", norm_err,
              slerp_err)};
}

} // namespace

int main(int argc, char **argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::function<Verdict()>> criteria{criterion_1, criterion_2, criterion_3,
                                                       criterion_4, criterion_5, criterion_6,
                                                       criterion_7, criterion_8, criterion_9};
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) {
      continue;
    }
    Verdict v;
    try {
      v = criteria[i]();
    } catch (const std::exception &e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu: %s  %s\n", i + 1, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
