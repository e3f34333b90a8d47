#include "gyrodeblur/validation.hpp"

#include <numbers>
#include <vector>

#include "gyrodeblur/parallel.hpp"

namespace gyrodeblur {

namespace {

// Sobel-x footprint on the integer grid [-1, 1]^2, zero elsewhere.
double sobel_tap(int u, int v) {
  if (u < -1 || u > 1 || v < -1 || v > 1) {
    return 0.0;
  }
  return u * (2 - std::abs(v)) / 4.0;
}

double sobel_bilinear(double u, double v) {
  const double u0 = std::floor(u);
  const double v0 = std::floor(v);
  const double fu = u - u0;
  const double fv = v - v0;
  const int iu = static_cast<int>(u0);
  const int iv = static_cast<int>(v0);
  return (1 - fu) * (1 - fv) * sobel_tap(iu, iv) + fu * (1 - fv) * sobel_tap(iu + 1, iv) +
         (1 - fu) * fv * sobel_tap(iu, iv + 1) + fu * fv * sobel_tap(iu + 1, iv + 1);
}

} // namespace

ValidationMode parse_validation_mode(const std::string &name) {
  if (name == "block") {
    return ValidationMode::block;
  }
  if (name == "image") {
    return ValidationMode::image;
  }
  if (name == "off") {
    return ValidationMode::off;
  }
  throw std::invalid_argument("unknown validation mode '" + name + "' (block|image|off)");
}

std::string to_string(ValidationMode mode) {
  switch (mode) {
  case ValidationMode::block:
    return "block";
  case ValidationMode::image:
    return "image";
  case ValidationMode::off:
    return "off";
  }
  return "?";
}

Eigen::Matrix3d rotated_sobel(double theta_deg) {
  const double rad = theta_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  Eigen::Matrix3d k;
  for (int v = -1; v <= 1; ++v) {
    for (int u = -1; u <= 1; ++u) {
      // Rotate the tap position back into the unrotated kernel frame.
      const double ur = c * u + s * v;
      const double vr = -s * u + c * v;
      double w = sobel_bilinear(ur, vr);
      if (std::abs(w) < 1e-15) {
        w = 0.0;
      }
      k(v + 1, u + 1) = w;
    }
  }
  const double pos = k.cwiseMax(0.0).sum();
  const double neg = -k.cwiseMin(0.0).sum();
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    double &w = k.data()[i];
    w = w > 0 ? w / pos : (w < 0 ? w / neg : 0.0);
  }
  return k;
}

BlurField validate_field(const Image &img, BlurField field, const ValidationConfig &cfg, unsigned threads) {
  cfg.validate();
  if (img.cols() != field.image_width() || img.rows() != field.image_height()) {
    throw std::invalid_argument("validate_field: field grid does not match image size");
  }

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < field.size(); ++i) {
    BlurCell &c = field.cells()[i];
    if (c.blur.extent < cfg.min_extent) {
      c.status = CellStatus::below_min_extent;
    } else {
      c.status = CellStatus::valid;
      eligible.push_back(i);
    }
  }

  if (cfg.mode == ValidationMode::off || eligible.empty()) {
    return field;
  }

  if (cfg.mode == ValidationMode::image) {
    std::vector<double> angles;
    angles.reserve(eligible.size());
    for (std::size_t i : eligible) {
      angles.push_back(field.cells()[i].blur.theta_deg);
    }
    const auto mid = angles.begin() + static_cast<std::ptrdiff_t>(angles.size() / 2);
    std::nth_element(angles.begin(), mid, angles.end());
    if (img.rows() < 3 || img.cols() < 3) {
      return field;
    }
    const bool reject = directional_gradient_max(img, *mid) > cfg.tau;
    if (reject) {
      for (std::size_t i : eligible) {
        field.cells()[i].status = CellStatus::rejected;
      }
    }
    return field;
  }

  const auto cols = static_cast<std::size_t>(field.grid_cols());
  parallel_for(eligible.size(), threads, [&](std::size_t k) {
    const std::size_t i = eligible[k];
    const BlockRect r = field.block(static_cast<int>(i % cols), static_cast<int>(i / cols));
    const int x0 = std::max(r.x0 - 1, 0);
    const int y0 = std::max(r.y0 - 1, 0);
    const int x1 = std::min(r.x0 + r.width + 1, static_cast<int>(img.cols()));
    const int y1 = std::min(r.y0 + r.height + 1, static_cast<int>(img.rows()));
    if (x1 - x0 < 3 || y1 - y0 < 3) {
      return;
    }
    BlurCell &cell = field.cells()[i];
    const double g = directional_gradient_max(img.block(y0, x0, y1 - y0, x1 - x0), cell.blur.theta_deg);
    if (g > cfg.tau) {
      cell.status = CellStatus::rejected;
    }
  });
  return field;
}

} // namespace gyrodeblur
