#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gyrodeblur {

/// One nonzero tap of a sparse 2D kernel, offset relative to the anchor pixel.
struct KernelElement {
  int dx = 0;
  int dy = 0;
  double weight = 0.0;

  friend bool operator==(const KernelElement &, const KernelElement &) = default;
};

/*
 * Sparse 2D kernel stored as its nonzero elements, sorted by (dy, dx).
 *
 * Applied with convolution semantics: out(p) = sum_e w_e * in(p - d_e).
 */
struct SparseKernel {
  std::vector<KernelElement> elements;

  [[nodiscard]] double sum() const;
  /// Largest |dx| or |dy| over all elements (0 for an empty kernel).
  [[nodiscard]] int radius() const;
  [[nodiscard]] SparseKernel transposed() const;

  friend bool operator==(const SparseKernel &, const SparseKernel &) = default;
};

/*
 * Centered box of `extent` equal taps inside a zero-padded array of length
 * 4 * extent + 1. When the padding cannot be split evenly the extra zero goes
 * to the right, which places the box half a pixel left of the array center.
 */
std::vector<double> centered_box_taps(int extent);

/*
 * Places a 1D odd-length weight array along the line through the anchor at
 * angle theta_deg (degrees, image coordinates with y pointing down).
 *
 * Tap i sits at along-line distance t = i - n/2. Its coordinate on the
 * dominant axis is rounded to the nearest pixel and the weight is split
 * linearly, (1 - f, f), between the two pixels straddling the line on the
 * other axis, so every tap touches at most two pixels and its weight is
 * conserved. Elements with |w| < drop_ratio * max|w| are discarded and their
 * weight is added to the nearest kept element, so the kernel sum is exact.
 */
SparseKernel rasterize_line(std::span<const double> weights, double theta_deg,
                            double drop_ratio = 1e-6);

} // namespace gyrodeblur
