#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gyrodeblur/blurfield.hpp"
#include "gyrodeblur/image.hpp"

namespace gyrodeblur {

enum class ValidationMode { block, image, off };

ValidationMode parse_validation_mode(const std::string &name);
std::string to_string(ValidationMode mode);

struct ValidationConfig {
  /// Maximum tolerated directional gradient on [0, 1] intensities.
  double tau = 0.3;
  ValidationMode mode = ValidationMode::block;
  /// Cells with a shorter blur than this are left alone.
  double min_extent = 2.0;

  void validate() const {
    if (!(tau > 0.0)) {
      throw std::invalid_argument("validation: tau must be > 0");
    }
  }
};

/*
 * 3x3 Sobel-x kernel rotated so it differentiates along (cos theta, sin theta).
 *
 * Tap (u, v) samples the bilinear interpolant of the Sobel-x footprint
 * (zero outside its 3x3 support) at the position rotated back by theta. The
 * positive taps are then scaled to sum to +1 and the negative taps to -1, so
 * the kernel sums to zero and a unit step along theta responds with 1.
 * Indexed (row = v + 1, col = u + 1). Any finite angle is accepted.
 */
Eigen::Matrix3d rotated_sobel(double theta_deg);

/// Largest |response| of the rotated Sobel over the interior of `block`.
template <typename Derived>
double directional_gradient_max(const Eigen::DenseBase<Derived> &block, double theta_deg) {
  if (block.rows() < 3 || block.cols() < 3) {
    throw std::invalid_argument("directional_gradient_max: block smaller than 3x3");
  }
  if (!(theta_deg >= 0.0 && theta_deg < 180.0)) {
    throw std::invalid_argument("directional_gradient_max: theta must lie in [0, 180)");
  }
  const Eigen::Matrix3d k = rotated_sobel(theta_deg);
  double best = 0.0;
  for (Eigen::Index y = 1; y + 1 < block.rows(); ++y) {
    for (Eigen::Index x = 1; x + 1 < block.cols(); ++x) {
      double acc = 0.0;
      for (int v = -1; v <= 1; ++v) {
        for (int u = -1; u <= 1; ++u) {
          acc += k(v + 1, u + 1) * static_cast<double>(block(y + v, x + u));
        }
      }
      best = std::max(best, std::abs(acc));
    }
  }
  return best;
}

/*
 * Marks each cell of `field` as valid, below_min_extent or rejected.
 *
 * In block mode each cell whose extent reaches min_extent is tested over its
 * own block (plus a one-pixel apron so every block pixel gets a response) with
 * the cell's own angle. Image mode runs one test over the whole image with the
 * median angle of the eligible cells and applies the verdict to all of them.
 * Off mode accepts every eligible cell.
 */
BlurField validate_field(const Image &img, BlurField field, const ValidationConfig &cfg,
                         unsigned threads = 0);

} // namespace gyrodeblur
