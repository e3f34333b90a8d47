#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gyrodeblur/kernel.hpp"
#include "gyrodeblur/parallel.hpp"

namespace gyrodeblur {

/// Single-channel image of normalized intensities, indexed (row, col).
template <typename Scalar>
using ImageX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image = ImageX<float>;
using Imaged = ImageX<double>;

// ---------------------------------------------------------------------------
// PGM / PPM
// ---------------------------------------------------------------------------

/// Reads binary P5 (gray) or P6 (RGB, converted to luma) with maxval 255.
Image load_image(const std::filesystem::path &path);

/// Writes binary P5, quantizing [0,1] to 8 bits with round-to-nearest.
void save_image(const Image &img, const std::filesystem::path &path);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// 10 log10(1 / MSE); +infinity for identical images.
template <typename Derived1, typename Derived2>
double psnr(const Eigen::ArrayBase<Derived1> &a, const Eigen::ArrayBase<Derived2> &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("psnr: dimension mismatch");
  }
  if (a.size() == 0) {
    throw std::invalid_argument("psnr: empty image");
  }
  const double mse =
      (a.template cast<double>() - b.template cast<double>()).square().mean();
  if (mse == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return 10.0 * std::log10(1.0 / mse);
}

// ---------------------------------------------------------------------------
// Edge-replicated padding and sparse convolution
// ---------------------------------------------------------------------------

/// Copy of `img` surrounded by `margin` pixels of edge replication.
template <typename Scalar>
ImageX<Scalar> pad_replicate(const ImageX<Scalar> &img, int margin) {
  const Eigen::Index h = img.rows();
  const Eigen::Index w = img.cols();
  ImageX<Scalar> out(h + 2 * margin, w + 2 * margin);
  for (Eigen::Index y = 0; y < out.rows(); ++y) {
    const Eigen::Index sy = std::clamp<Eigen::Index>(y - margin, 0, h - 1);
    for (Eigen::Index x = 0; x < out.cols(); ++x) {
      const Eigen::Index sx = std::clamp<Eigen::Index>(x - margin, 0, w - 1);
      out(y, x) = img(sy, sx);
    }
  }
  return out;
}

/*
 * Convolves the rectangle [x0, x0 + bw) x [y0, y0 + bh) of the source with a
 * sparse kernel, writing into the same rectangle of `dst`.
 *
 * `padded` is the source after pad_replicate(src, margin) with margin at least
 * the kernel radius. Each output pixel accumulates the elements in kernel
 * order, so the result does not depend on how the image is partitioned.
 */
template <typename Scalar>
void convolve_rect(const ImageX<Scalar> &padded, int margin, const SparseKernel &kernel,
                   ImageX<Scalar> &dst, Eigen::Index x0, Eigen::Index y0, Eigen::Index bw,
                   Eigen::Index bh) {
  for (Eigen::Index y = y0; y < y0 + bh; ++y) {
    dst.row(y).segment(x0, bw).setZero();
  }
  for (const auto &e : kernel.elements) {
    const Scalar w = static_cast<Scalar>(e.weight);
    for (Eigen::Index y = y0; y < y0 + bh; ++y) {
      const Scalar *src = &padded(y - e.dy + margin, x0 - e.dx + margin);
      Scalar *out = &dst(y, x0);
      for (Eigen::Index x = 0; x < bw; ++x) {
        out[x] += w * src[x];
      }
    }
  }
}

/// Whole-image sparse convolution with edge replication, parallel over row bands.
template <typename Scalar>
ImageX<Scalar> convolve_sparse(const ImageX<Scalar> &img, const SparseKernel &kernel,
                               unsigned threads = 0) {
  const int margin = kernel.radius() + 1;
  const ImageX<Scalar> padded = pad_replicate(img, margin);
  ImageX<Scalar> out(img.rows(), img.cols());
  constexpr Eigen::Index band = 32;
  const auto bands = static_cast<std::size_t>((img.rows() + band - 1) / band);
  parallel_for(bands, threads, [&](std::size_t b) {
    const Eigen::Index y0 = static_cast<Eigen::Index>(b) * band;
    const Eigen::Index bh = std::min(band, img.rows() - y0);
    convolve_rect(padded, margin, kernel, out, 0, y0, img.cols(), bh);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Bilinear sample with edge replication; (x, y) in pixel-center coordinates.
template <typename Scalar>
Scalar sample_bilinear(const ImageX<Scalar> &img, double x, double y) {
  const double cx = std::clamp(x, 0.0, static_cast<double>(img.cols() - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(img.rows() - 1));
  const auto x0 = static_cast<Eigen::Index>(std::floor(cx));
  const auto y0 = static_cast<Eigen::Index>(std::floor(cy));
  const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, img.cols() - 1);
  const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, img.rows() - 1);
  const double fx = cx - static_cast<double>(x0);
  const double fy = cy - static_cast<double>(y0);
  const double top = (1 - fx) * img(y0, x0) + fx * img(y0, x1);
  const double bottom = (1 - fx) * img(y1, x0) + fx * img(y1, x1);
  return static_cast<Scalar>((1 - fy) * top + fy * bottom);
}

/*
 * Warps `img` by the plane mapping `h` (source -> destination), producing an
 * image of the given size by inverse mapping with bilinear sampling.
 */
template <typename Scalar>
ImageX<Scalar> warp_perspective(const ImageX<Scalar> &img, const Eigen::Matrix3d &h,
                                Eigen::Index out_rows, Eigen::Index out_cols) {
  const Eigen::Matrix3d inv = h.inverse();
  ImageX<Scalar> out(out_rows, out_cols);
  for (Eigen::Index y = 0; y < out_rows; ++y) {
    for (Eigen::Index x = 0; x < out_cols; ++x) {
      const Eigen::Vector3d p = inv * Eigen::Vector3d(static_cast<double>(x), static_cast<double>(y), 1.0);
      out(y, x) = sample_bilinear(img, p.x() / p.z(), p.y() / p.z());
    }
  }
  return out;
}

} // namespace gyrodeblur
