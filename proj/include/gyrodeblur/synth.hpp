#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "gyrodeblur/image.hpp"
#include "gyrodeblur/kernel.hpp"

namespace gyrodeblur {

/// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/*
 * Standard normal deviate that is a pure function of (seed, counter).
 *
 * Two 53-bit uniforms are derived by hashing the key, then combined with the
 * Box-Muller transform. Parallel callers get identical streams regardless of
 * how counters are distributed over threads.
 */
inline double counter_normal(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t k = mix64(seed ^ mix64(counter));
  const std::uint64_t a = mix64(k);
  const std::uint64_t b = mix64(k ^ 0xd1b54a32d192ed03ULL);
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;         // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Forward linear-motion PSF: centered box of `extent` taps rasterized at theta.
inline SparseKernel motion_psf(double theta_deg, int extent) {
  const auto taps = centered_box_taps(extent);
  return rasterize_line(taps, theta_deg);
}

/*
 * Synthetic linear motion blur followed by signal-relative Gaussian noise.
 *
 * Noise variance is mean(blurred^2) / 10^(snr_db / 10); no noise is added when
 * snr_db is empty. The result is clamped to [0, 1] and is bit-identical for a
 * given seed irrespective of thread count.
 */
template <typename Scalar>
ImageX<Scalar> synth_blur(const ImageX<Scalar> &img, double theta_deg, int extent,
                          std::uint64_t seed, std::optional<double> snr_db,
                          unsigned threads = 0) {
  if (extent < 1) {
    throw std::invalid_argument("synth_blur: extent must be >= 1");
  }
  ImageX<Scalar> out = convolve_sparse(img, motion_psf(theta_deg, extent), threads);
  if (snr_db) {
    if (!std::isfinite(*snr_db)) {
      throw std::invalid_argument("synth_blur: snr must be finite");
    }
    const double power = out.template cast<double>().square().mean();
    const double sigma = std::sqrt(power / std::pow(10.0, *snr_db / 10.0));
    const auto cols = static_cast<std::uint64_t>(out.cols());
    for (Eigen::Index y = 0; y < out.rows(); ++y) {
      for (Eigen::Index x = 0; x < out.cols(); ++x) {
        const std::uint64_t index = static_cast<std::uint64_t>(y) * cols + static_cast<std::uint64_t>(x);
        out(y, x) += static_cast<Scalar>(sigma * counter_normal(seed, index));
      }
    }
  }
  return out.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

/*
 * Full-image frequency-domain Wiener deconvolution with the PSF of
 * motion_psf(theta_deg, extent), circularly embedded in an image-sized grid.
 *
 * Serves as the reference for the spatial engine; it wraps around at the
 * borders. The output is not clamped.
 */
Imaged frequency_wiener_reference(const Imaged &img, double theta_deg, int extent, double gamma);

template <typename Scalar>
ImageX<Scalar> frequency_wiener_reference(const ImageX<Scalar> &img, double theta_deg,
                                          int extent, double gamma) {
  return frequency_wiener_reference(Imaged(img.template cast<double>()), theta_deg, extent, gamma)
      .template cast<Scalar>();
}

} // namespace gyrodeblur
