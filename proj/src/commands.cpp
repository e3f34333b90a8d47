#include "gyrodeblur/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "gyrodeblur/eval.hpp"
#include "gyrodeblur/image.hpp"
#include "gyrodeblur/keypoint.hpp"
#include "gyrodeblur/synth.hpp"

namespace gyrodeblur {

namespace {

OrientationTrajectory load_trajectory(const std::filesystem::path &imu) {
  const auto samples = load_imu_csv(imu);
  return integrate_gyro(samples);
}

std::string bank_cache_name(int r_max, double gamma) {
  std::ostringstream name;
  name << "bank_r" << r_max << "_g" << std::setprecision(17) << gamma << ".idbk";
  return name.str();
}

} // namespace

KernelBank obtain_bank(int r_max, double gamma, const std::optional<std::filesystem::path> &explicit_file,
                       unsigned threads) {
  if (explicit_file) {
    KernelBank bank = load_bank(*explicit_file);
    if (bank.r_max() != r_max || bank.gamma() != gamma) {
      std::ostringstream msg;
      msg << "kernel bank " << explicit_file->string() << " has r_max " << bank.r_max() << ", gamma "
          << bank.gamma() << " but r_max " << r_max << ", gamma " << gamma << " was requested";
      throw std::runtime_error(msg.str());
    }
    return bank;
  }
  const char *dir = std::getenv(kBankDirEnv);
  if (dir == nullptr || *dir == '\0') {
    return build_bank(r_max, gamma, threads);
  }
  const std::filesystem::path cached = std::filesystem::path(dir) / bank_cache_name(r_max, gamma);
  if (std::filesystem::exists(cached)) {
    try {
      KernelBank bank = load_bank(cached);
      if (bank.r_max() == r_max && bank.gamma() == gamma) {
        return bank;
      }
    } catch (const std::exception &e) {
      std::cerr << "warning: ignoring unreadable bank cache " << cached.string() << ": " << e.what() << '\n';
    }
  }
  KernelBank bank = build_bank(r_max, gamma, threads);
  std::filesystem::create_directories(dir);
  // Write then rename so a concurrent reader never sees a partial file.
  const std::filesystem::path tmp = cached.string() + ".tmp";
  save_bank(bank, tmp);
  std::filesystem::rename(tmp, cached);
  return bank;
}

// ---------------------------------------------------------------------------
// deblur
// ---------------------------------------------------------------------------

DeblurStats run_deblur(const DeblurOptions &opts) {
  const auto start = std::chrono::steady_clock::now();
  opts.validation.validate();
  if (!(opts.gamma > 0.0)) {
    throw std::invalid_argument("gamma must be > 0");
  }
  const Image img = load_image(opts.input);
  const CameraRig rig = load_camera_json(opts.camera);
  if (img.cols() != rig.width || img.rows() != rig.height) {
    std::ostringstream msg;
    msg << "image is " << img.cols() << "x" << img.rows() << " but the camera config says " << rig.width << "x"
        << rig.height;
    throw std::invalid_argument(msg.str());
  }
  const OrientationTrajectory traj = load_trajectory(opts.imu);

  BlurField field = estimate_blur_field(rig, traj, opts.block, opts.block, opts.threads);
  field = validate_field(img, std::move(field), opts.validation, opts.threads);

  DeblurStats stats;
  stats.cells = field.size();
  stats.valid = field.count(CellStatus::valid);
  stats.invalid = stats.cells - stats.valid;
  double total = 0.0;
  for (const auto &c : field.cells()) {
    total += c.blur.extent;
  }
  stats.mean_extent = stats.cells > 0 ? total / static_cast<double>(stats.cells) : 0.0;

  if (stats.valid == 0) {
    save_image(img, opts.output);
  } else {
    const KernelBank bank = obtain_bank(opts.r_max, opts.gamma, opts.bank_file, opts.threads);
    const DeblurResult<float> result = deblur_image(img, field, bank, opts.threads);
    stats.clamped = result.clamped_cells;
    save_image(result.image, opts.output);
  }
  if (opts.field_csv) {
    write_field_csv(field, *opts.field_csv);
  }
  stats.field = std::move(field);
  stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

CameraRig synth_camera(int width, int height, Timestamp exposure_ns, Timestamp readout_ns, double focal_px) {
  CameraRig rig;
  rig.width = width;
  rig.height = height;
  const double f = focal_px > 0.0 ? focal_px : 1.2 * std::max(width, height);
  rig.fx = f;
  rig.fy = f;
  rig.cx = 0.5 * (width - 1);
  rig.cy = 0.5 * (height - 1);
  rig.exposure_ns = exposure_ns;
  rig.readout_ns = readout_ns;
  rig.frame_ts_ns = 10'000'000;
  rig.validate();
  return rig;
}

std::vector<GyroSample> synth_trace(const CameraRig &rig, double theta_deg, double extent) {
  rig.validate();
  if (!(extent >= 0.0) || !std::isfinite(extent)) {
    throw std::invalid_argument("synth: extent must be finite and >= 0");
  }
  const double th = theta_deg * std::numbers::pi / 180.0;
  // Camera rotation R with R * e_z proportional to (r cos/fx, r sin/fy, 1):
  // axis (ax, ay, 0), angle phi, R e_z = (tan(phi) ay, -tan(phi) ax, 1) after scaling.
  const double sx = extent * std::cos(th) / rig.fx;
  const double sy = extent * std::sin(th) / rig.fy;
  const double tan_phi = std::hypot(sx, sy);
  Eigen::Vector3d omega_cam = Eigen::Vector3d::Zero();
  if (tan_phi > 0.0) {
    const double phi = std::atan(tan_phi);
    const Eigen::Vector3d axis(-sy / tan_phi, sx / tan_phi, 0.0);
    // The relative rotation over an exposure is exp(-omega * t_e) for a constant rate.
    omega_cam = -axis * phi / (static_cast<double>(rig.exposure_ns) * 1e-9);
  }
  const Eigen::Vector3d omega_gyro = rig.gyro_to_camera.transpose() * omega_cam;

  constexpr Timestamp period = 5'000'000;
  constexpr Timestamp margin = 10'000'000;
  const Timestamp first = rig.frame_ts_ns - margin;
  const Timestamp last = rig.frame_ts_ns + rig.readout_ns + rig.exposure_ns + margin;
  std::vector<GyroSample> samples;
  for (Timestamp t = first;; t += period) {
    samples.push_back({t, omega_gyro});
    if (t >= last) {
      break;
    }
  }
  return samples;
}

void run_synth(const SynthOptions &opts) {
  if (opts.extent < 1) {
    throw std::invalid_argument("synth: extent must be >= 1");
  }
  if (!(opts.theta_deg >= 0.0 && opts.theta_deg < 180.0)) {
    throw std::invalid_argument("synth: theta must lie in [0, 180)");
  }
  const Image sharp = load_image(opts.input);
  const CameraRig rig = synth_camera(static_cast<int>(sharp.cols()), static_cast<int>(sharp.rows()),
                                     opts.exposure_ns, opts.readout_ns, opts.focal_px);
  const Image blurred = synth_blur(sharp, opts.theta_deg, opts.extent, opts.seed, opts.snr_db, opts.threads);
  save_image(blurred, opts.out_image);
  save_imu_csv(synth_trace(rig, opts.theta_deg, opts.extent), opts.out_imu);
  save_camera_json(rig, opts.out_camera);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

EvalRow evaluate_pair(const EvalOptions &opts) {
  auto ka = load_keypoints_csv(opts.a);
  auto kb = load_keypoints_csv(opts.b);
  const Homography h = load_homography(opts.homography);
  if (ka.size() < opts.count || kb.size() < opts.count) {
    std::cerr << "warning: " << opts.pair << ": fewer than " << opts.count << " keypoints (" << ka.size() << ", "
              << kb.size() << "); using all\n";
  }
  ka = truncate_by_response(std::move(ka), opts.count);
  kb = truncate_by_response(std::move(kb), opts.count);

  EvalRow row;
  row.pair = opts.pair;
  row.count = std::min(ka.size(), kb.size());
  const auto matches = match_keypoints(ka, kb, h, opts.overlap);
  row.matches = matches.size();
  row.rep = repeatability(ka, kb, h, opts.overlap);
  row.loc_err = localization_error(ka, kb, h, opts.overlap);
  return row;
}

std::vector<EvalRow> evaluate_batch(const std::filesystem::path &manifest, std::size_t count, double overlap) {
  std::ifstream in(manifest);
  if (!in) {
    throw std::runtime_error("cannot open manifest " + manifest.string());
  }
  const std::filesystem::path base = manifest.parent_path();
  auto resolve = [&](const std::string &p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  std::string line;
  if (!std::getline(in, line) || line.rfind("pair,a,b,homography", 0) != 0) {
    throw std::runtime_error("manifest header must be pair,a,b,homography: " + manifest.string());
  }
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) {
      fields.push_back(f);
    }
    if (fields.size() != 4) {
      throw std::runtime_error("manifest row needs 4 fields: " + line);
    }
    EvalOptions o;
    o.pair = fields[0];
    o.a = resolve(fields[1]);
    o.b = resolve(fields[2]);
    o.homography = resolve(fields[3]);
    o.count = count;
    o.overlap = overlap;
    rows.push_back(evaluate_pair(o));
  }
  if (rows.empty()) {
    throw std::runtime_error("manifest lists no pairs: " + manifest.string());
  }

  EvalRow avg;
  avg.pair = "avg.";
  double loc_sum = 0.0;
  std::size_t loc_n = 0;
  double match_sum = 0.0;
  double count_sum = 0.0;
  for (const auto &r : rows) {
    avg.rep += r.rep;
    match_sum += static_cast<double>(r.matches);
    count_sum += static_cast<double>(r.count);
    if (r.loc_err) {
      loc_sum += *r.loc_err;
      ++loc_n;
    }
  }
  const auto n = static_cast<double>(rows.size());
  avg.rep /= n;
  if (loc_n > 0) {
    avg.loc_err = loc_sum / static_cast<double>(loc_n);
  }
  avg.matches = static_cast<std::size_t>(std::lround(match_sum / n));
  avg.count = static_cast<std::size_t>(std::lround(count_sum / n));
  rows.push_back(avg);
  return rows;
}

void write_eval_report(const std::vector<EvalRow> &rows, const std::filesystem::path &path, bool append) {
  const bool header = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write report " + path.string());
  }
  if (header) {
    out << "pair,rep,loc_err,matches,count\n";
  }
  out << std::setprecision(6);
  for (const auto &r : rows) {
    out << r.pair << ',' << r.rep << ',';
    if (r.loc_err) {
      out << *r.loc_err;
    }
    out << ',' << r.matches << ',' << r.count << '\n';
  }
}

// ---------------------------------------------------------------------------
// field
// ---------------------------------------------------------------------------

Image render_field_preview(const BlurField &field) {
  Image out = Image::Zero(field.image_height(), field.image_width());
  auto plot = [&](double x, double y) {
    const long ix = std::lround(x);
    const long iy = std::lround(y);
    if (ix >= 0 && iy >= 0 && ix < out.cols() && iy < out.rows()) {
      out(iy, ix) = 1.0F;
    }
  };
  for (int row = 0; row < field.grid_rows(); ++row) {
    for (int col = 0; col < field.grid_cols(); ++col) {
      const BlurCell &c = field.cell(col, row);
      const ImagePoint center = field.center(col, row);
      const double th = c.blur.theta_deg * std::numbers::pi / 180.0;
      const double half = 0.5 * c.blur.extent;
      const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * c.blur.extent)));
      for (int s = 0; s <= steps; ++s) {
        const double t = -half + c.blur.extent * s / steps;
        plot(center.x() + t * std::cos(th), center.y() + t * std::sin(th));
      }
    }
  }
  return out;
}

BlurField run_field(const FieldOptions &opts) {
  const CameraRig rig = load_camera_json(opts.camera);
  const OrientationTrajectory traj = load_trajectory(opts.imu);
  BlurField field = estimate_blur_field(rig, traj, opts.block, opts.block, opts.threads);
  write_field_csv(field, opts.csv);
  if (opts.preview) {
    save_image(render_field_preview(field), *opts.preview);
  }
  return field;
}

// ---------------------------------------------------------------------------
// rectify
// ---------------------------------------------------------------------------

void run_rectify(const RectifyOptions &opts) {
  const CameraRig rig = load_camera_json(opts.camera);
  const OrientationTrajectory traj = load_trajectory(opts.imu);
  const auto kps = load_keypoints_csv(opts.keypoints);
  std::vector<Keypoint> out;
  if (opts.image) {
    opts.validation.validate();
    const Image img = load_image(*opts.image);
    if (img.cols() != rig.width || img.rows() != rig.height) {
      throw std::invalid_argument("image size does not match the camera config");
    }
    BlurField field = estimate_blur_field(rig, traj, opts.block, opts.block, opts.threads);
    field = validate_field(img, std::move(field), opts.validation, opts.threads);
    out = rectify_keypoints(rig, traj, kps, &field);
  } else {
    out = rectify_keypoints(rig, traj, kps);
  }
  save_keypoints_csv(out, opts.output);
}

// ---------------------------------------------------------------------------
// bank
// ---------------------------------------------------------------------------

BankReport run_bank(int r_max, double gamma, const std::filesystem::path &out, unsigned threads) {
  const KernelBank bank = build_bank(r_max, gamma, threads);
  save_bank(bank, out);
  return {bank.size(), bank.max_elements()};
}

} // namespace gyrodeblur
