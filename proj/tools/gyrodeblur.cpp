// Command-line front end: deblur, synth, eval, field, rectify and bank.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "gyrodeblur/commands.hpp"

namespace gd = gyrodeblur;

namespace {

void add_validation_flags(CLI::App *cmd, gd::ValidationConfig &cfg, std::string &mode) {
  cmd->add_option("--tau", cfg.tau, "Maximum directional gradient on [0,1] intensities")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--validate", mode, "Validation granularity")
      ->capture_default_str()
      ->check(CLI::IsMember({"block", "image", "off"}));
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Gyro-driven spatially-variant motion deblurring"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();

  // deblur
  gd::DeblurOptions deblur;
  std::string deblur_mode = "block";
  std::string deblur_field;
  std::string deblur_bank;
  auto *cmd_deblur = app.add_subcommand("deblur", "Estimate, validate and remove blur in one frame");
  cmd_deblur->add_option("--input,-i", deblur.input, "Blurred PGM/PPM")->required()->check(CLI::ExistingFile);
  cmd_deblur->add_option("--camera,-c", deblur.camera, "Camera JSON")->required()->check(CLI::ExistingFile);
  cmd_deblur->add_option("--imu", deblur.imu, "Gyro CSV t_ns,wx,wy,wz")->required()->check(CLI::ExistingFile);
  cmd_deblur->add_option("--output,-o", deblur.output, "Output PGM")->required();
  cmd_deblur->add_option("--field-csv", deblur_field, "Write the validated blur field here");
  cmd_deblur->add_option("--bank", deblur_bank, "Kernel bank file from `bank`")->check(CLI::ExistingFile);
  cmd_deblur->add_option("--block", deblur.block, "Block size in px")->capture_default_str();
  cmd_deblur->add_option("--gamma", deblur.gamma, "Wiener regularizer")->capture_default_str();
  cmd_deblur->add_option("--r-max", deblur.r_max, "Largest bank extent in px")->capture_default_str();
  add_validation_flags(cmd_deblur, deblur.validation, deblur_mode);

  // synth
  gd::SynthOptions synth;
  std::optional<double> snr;
  double exposure_ms = 30.0;
  double readout_ms = 20.0;
  auto *cmd_synth = app.add_subcommand("synth", "Blur a sharp frame and emit a matching gyro trace");
  cmd_synth->add_option("--input,-i", synth.input, "Sharp PGM/PPM")->required()->check(CLI::ExistingFile);
  cmd_synth->add_option("--output,-o", synth.out_image, "Blurred PGM")->required();
  cmd_synth->add_option("--imu-out", synth.out_imu, "Gyro CSV to write")->required();
  cmd_synth->add_option("--camera-out", synth.out_camera, "Camera JSON to write")->required();
  cmd_synth->add_option("--theta", synth.theta_deg, "Blur angle in degrees [0,180)")->required();
  cmd_synth->add_option("--extent,-r", synth.extent, "Blur extent in px")->required();
  cmd_synth->add_option("--snr-db", snr, "Signal-relative noise level; omit for no noise");
  cmd_synth->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();
  cmd_synth->add_option("--exposure-ms", exposure_ms, "Exposure time")->capture_default_str();
  cmd_synth->add_option("--readout-ms", readout_ms, "Rolling-shutter readout time")->capture_default_str();
  cmd_synth->add_option("--focal", synth.focal_px, "Focal length in px (0 = 1.2 * max side)")
      ->capture_default_str();

  // eval
  gd::EvalOptions eval;
  std::string eval_batch;
  std::string eval_report;
  bool eval_append = false;
  auto *cmd_eval = app.add_subcommand("eval", "Repeatability and localization error of keypoint sets");
  cmd_eval->add_option("--a", eval.a, "Reference keypoints CSV")->check(CLI::ExistingFile);
  cmd_eval->add_option("--b", eval.b, "Second keypoints CSV")->check(CLI::ExistingFile);
  cmd_eval->add_option("--homography,-H", eval.homography, "3x3 mapping A -> B")->check(CLI::ExistingFile);
  cmd_eval->add_option("--pair", eval.pair, "Row label")->capture_default_str();
  cmd_eval->add_option("--batch", eval_batch, "Manifest CSV pair,a,b,homography")->check(CLI::ExistingFile);
  cmd_eval->add_option("--count", eval.count, "Keypoints kept per image")->capture_default_str();
  cmd_eval->add_option("--overlap", eval.overlap, "Minimum circle IoU")->capture_default_str();
  cmd_eval->add_option("--report", eval_report, "Report CSV pair,rep,loc_err,matches,count")->required();
  cmd_eval->add_flag("--append", eval_append, "Append to an existing report");

  // field
  gd::FieldOptions field;
  std::string field_preview;
  auto *cmd_field = app.add_subcommand("field", "Export the gyro blur field and a preview image");
  cmd_field->add_option("--camera,-c", field.camera, "Camera JSON")->required()->check(CLI::ExistingFile);
  cmd_field->add_option("--imu", field.imu, "Gyro CSV")->required()->check(CLI::ExistingFile);
  cmd_field->add_option("--csv", field.csv, "Field CSV")->required();
  cmd_field->add_option("--preview", field_preview, "Preview PGM with one segment per block");
  cmd_field->add_option("--block", field.block, "Block size in px")->capture_default_str();

  // rectify
  gd::RectifyOptions rectify;
  std::string rectify_image;
  std::string rectify_mode = "block";
  auto *cmd_rectify = app.add_subcommand("rectify", "Undo rolling-shutter skew of keypoint locations");
  cmd_rectify->add_option("--keypoints,-k", rectify.keypoints, "Keypoints CSV")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_rectify->add_option("--camera,-c", rectify.camera, "Camera JSON")->required()->check(CLI::ExistingFile);
  cmd_rectify->add_option("--imu", rectify.imu, "Gyro CSV")->required()->check(CLI::ExistingFile);
  cmd_rectify->add_option("--output,-o", rectify.output, "Rectified keypoints CSV")->required();
  cmd_rectify->add_option("--image", rectify_image, "Frame used to validate the blur field")
      ->check(CLI::ExistingFile);
  cmd_rectify->add_option("--block", rectify.block, "Block size in px")->capture_default_str();
  add_validation_flags(cmd_rectify, rectify.validation, rectify_mode);

  // bank
  int bank_r_max = 95;
  double bank_gamma = gd::kDefaultGamma;
  std::string bank_out;
  auto *cmd_bank = app.add_subcommand("bank", "Precompute and store the inverse kernel bank");
  cmd_bank->add_option("--r-max", bank_r_max, "Largest extent in px")->capture_default_str();
  cmd_bank->add_option("--gamma", bank_gamma, "Wiener regularizer")->capture_default_str();
  cmd_bank->add_option("--output,-o", bank_out, "Bank file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() != 0) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
    return app.exit(e);
  }

  try {
    if (*cmd_deblur) {
      deblur.threads = threads;
      deblur.validation.mode = gd::parse_validation_mode(deblur_mode);
      if (!deblur_field.empty()) {
        deblur.field_csv = deblur_field;
      }
      if (!deblur_bank.empty()) {
        deblur.bank_file = deblur_bank;
      }
      const gd::DeblurStats s = gd::run_deblur(deblur);
      std::fprintf(stderr, "cells=%zu valid=%zu invalid=%zu clamped=%zu mean_extent=%.3f wall_ms=%.1f\n", s.cells,
                   s.valid, s.invalid, s.clamped, s.mean_extent, s.wall_ms);
      if (s.clamped > 0) {
        std::cerr << "warning: " << s.clamped << " cells exceeded r_max " << deblur.r_max
                  << " and were deblurred at r_max\n";
      }
    } else if (*cmd_synth) {
      synth.threads = threads;
      synth.snr_db = snr;
      synth.exposure_ns = static_cast<gd::Timestamp>(exposure_ms * 1e6 + 0.5);
      synth.readout_ns = static_cast<gd::Timestamp>(readout_ms * 1e6 + 0.5);
      gd::run_synth(synth);
    } else if (*cmd_eval) {
      std::vector<gd::EvalRow> rows;
      if (!eval_batch.empty()) {
        rows = gd::evaluate_batch(eval_batch, eval.count, eval.overlap);
      } else {
        if (eval.a.empty() || eval.b.empty() || eval.homography.empty()) {
          throw std::invalid_argument("eval needs --a, --b and --homography, or --batch");
        }
        rows.push_back(gd::evaluate_pair(eval));
      }
      gd::write_eval_report(rows, eval_report, eval_append);
    } else if (*cmd_field) {
      field.threads = threads;
      if (!field_preview.empty()) {
        field.preview = field_preview;
      }
      const gd::BlurField f = gd::run_field(field);
      std::fprintf(stderr, "cells=%zu grid=%dx%d\n", f.size(), f.grid_cols(), f.grid_rows());
    } else if (*cmd_rectify) {
      rectify.threads = threads;
      rectify.validation.mode = gd::parse_validation_mode(rectify_mode);
      if (!rectify_image.empty()) {
        rectify.image = rectify_image;
      }
      gd::run_rectify(rectify);
    } else if (*cmd_bank) {
      const gd::BankReport r = gd::run_bank(bank_r_max, bank_gamma, bank_out, threads);
      std::fprintf(stderr, "kernels=%zu max_elements=%zu\n", r.kernels, r.max_elements);
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
