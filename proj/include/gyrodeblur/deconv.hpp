#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "gyrodeblur/blurfield.hpp"
#include "gyrodeblur/image.hpp"
#include "gyrodeblur/kernel.hpp"
#include "gyrodeblur/parallel.hpp"

namespace gyrodeblur {

/// Default regularizer (noise-to-signal ratio) of the inverse filter.
inline constexpr double kDefaultGamma = 0.01;
/// Smallest extent worth deblurring; also the bank's first extent row.
inline constexpr int kMinBankExtent = 2;
inline constexpr int kBankAngles = 180;

/// 1D motion PSF: `extent` taps of 1/extent centered in 4 * extent + 1 zeros.
struct Psf1D {
  std::vector<double> taps;
  int extent = 0;
};

Psf1D build_psf_1d(int extent);

/*
 * Spatial Wiener inverse of a 1D PSF.
 *
 * The DFT of the padded taps (length unchanged) gives H; W = conj(H) /
 * (|H|^2 + gamma) is transformed back and the real part returned, aligned so
 * the PSF center maps to the array center. The weights sum to 1 / (1 + gamma).
 */
std::vector<double> wiener_inverse_1d(const Psf1D &psf, double gamma);

/// Rotates 1D inverse weights into a sparse 2D kernel (see rasterize_line).
SparseKernel rasterize_kernel_2d(std::span<const double> weights, double theta_deg);

struct InverseKernel {
  SparseKernel kernel;
  int theta_deg = 0;
  int extent = 0;
  double gamma = kDefaultGamma;
};

/// Precomputed inverse kernels for theta = 0..179 deg and extent = 2..r_max px.
class KernelBank {
public:
  KernelBank() = default;
  KernelBank(int r_max, double gamma, std::vector<InverseKernel> kernels);

  [[nodiscard]] int r_max() const { return r_max_; }
  [[nodiscard]] double gamma() const { return gamma_; }
  [[nodiscard]] bool empty() const { return kernels_.empty(); }
  [[nodiscard]] std::size_t size() const { return kernels_.size(); }
  [[nodiscard]] const std::vector<InverseKernel> &kernels() const { return kernels_; }

  /// Kernel for whole-degree angle and integer extent; throws when out of range.
  [[nodiscard]] const InverseKernel &at(int theta_deg, int extent) const;

  /// Nearest bank entry for a continuous blur vector, extent clamped to r_max.
  [[nodiscard]] const InverseKernel &nearest(const BlurVector &blur, bool *clamped = nullptr) const;

  [[nodiscard]] std::size_t max_elements() const;

private:
  int r_max_ = 0;
  double gamma_ = kDefaultGamma;
  std::vector<InverseKernel> kernels_; // (theta, extent) order
};

KernelBank build_bank(int r_max, double gamma, unsigned threads = 0);

/*
 * Binary bank cache, little-endian:
 *   "IDBK1" | r_max:u32 | gamma:f64 |
 *   per kernel in (theta, extent) order: count:u32, count x (dx:i16, dy:i16, w:f32) |
 *   FNV-1a 64 checksum of all preceding bytes:u64
 * Loading verifies the checksum and the DC gain of every kernel.
 */
void save_bank(const KernelBank &bank, const std::filesystem::path &path);
KernelBank load_bank(const std::filesystem::path &path);

/// DC-gain tolerance applied when loading float32 weights from disk.
inline constexpr double kLoadedDcTolerance = 1e-5;

template <typename Scalar>
struct DeblurResult {
  ImageX<Scalar> image;
  std::size_t deblurred_cells = 0;
  /// Cells whose extent exceeded the bank and were deblurred at r_max.
  std::size_t clamped_cells = 0;
};

/*
 * Block-wise spatially-variant deconvolution.
 *
 * Every valid cell is deconvolved with its nearest bank kernel; reads may
 * cross into neighbouring blocks and use edge replication outside the image.
 * Other cells are copied through. Output is clamped to [0, 1] and does not
 * depend on the thread count.
 */
template <typename Scalar>
DeblurResult<Scalar> deblur_image(const ImageX<Scalar> &img, const BlurField &field,
                                  const KernelBank &bank, unsigned threads = 0) {
  if (bank.empty()) {
    throw std::invalid_argument("deblur_image: empty kernel bank");
  }
  if (img.cols() != field.image_width() || img.rows() != field.image_height()) {
    throw std::invalid_argument("deblur_image: field grid does not match image size");
  }

  DeblurResult<Scalar> result;
  std::vector<const SparseKernel *> chosen(field.size(), nullptr);
  int margin = 1;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const BlurCell &cell = field.cells()[i];
    if (!cell.valid() || std::lround(cell.blur.extent) < kMinBankExtent) {
      continue;
    }
    bool clamped = false;
    const InverseKernel &k = bank.nearest(cell.blur, &clamped);
    chosen[i] = &k.kernel;
    margin = std::max(margin, k.kernel.radius() + 1);
    result.deblurred_cells += 1;
    result.clamped_cells += clamped ? 1 : 0;
  }

  result.image = img;
  if (result.deblurred_cells == 0) {
    return result;
  }

  const ImageX<Scalar> padded = pad_replicate(img, margin);
  const auto cols = static_cast<std::size_t>(field.grid_cols());
  parallel_for(field.size(), threads, [&](std::size_t i) {
    if (chosen[i] == nullptr) {
      return;
    }
    const BlockRect r = field.block(static_cast<int>(i % cols), static_cast<int>(i / cols));
    convolve_rect(padded, margin, *chosen[i], result.image, r.x0, r.y0, r.width, r.height);
    auto out = result.image.block(r.y0, r.x0, r.height, r.width);
    out = out.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  });
  return result;
}

} // namespace gyrodeblur
