#include "gyrodeblur/synth.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <vector>

namespace gyrodeblur {

namespace {

using ComplexGrid = Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void fft2(ComplexGrid &grid, bool inverse) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in;
  std::vector<std::complex<double>> out;

  in.resize(static_cast<std::size_t>(grid.cols()));
  for (Eigen::Index y = 0; y < grid.rows(); ++y) {
    for (Eigen::Index x = 0; x < grid.cols(); ++x) {
      in[static_cast<std::size_t>(x)] = grid(y, x);
    }
    inverse ? fft.inv(out, in) : fft.fwd(out, in);
    for (Eigen::Index x = 0; x < grid.cols(); ++x) {
      grid(y, x) = out[static_cast<std::size_t>(x)];
    }
  }

  in.resize(static_cast<std::size_t>(grid.rows()));
  for (Eigen::Index x = 0; x < grid.cols(); ++x) {
    for (Eigen::Index y = 0; y < grid.rows(); ++y) {
      in[static_cast<std::size_t>(y)] = grid(y, x);
    }
    inverse ? fft.inv(out, in) : fft.fwd(out, in);
    for (Eigen::Index y = 0; y < grid.rows(); ++y) {
      grid(y, x) = out[static_cast<std::size_t>(y)];
    }
  }
}

Eigen::Index wrap(Eigen::Index v, Eigen::Index n) {
  const Eigen::Index m = v % n;
  return m < 0 ? m + n : m;
}

} // namespace

Imaged frequency_wiener_reference(const Imaged &img, double theta_deg, int extent, double gamma) {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("frequency_wiener_reference: gamma must be > 0");
  }
  const Eigen::Index h = img.rows();
  const Eigen::Index w = img.cols();
  const SparseKernel psf = motion_psf(theta_deg, extent);

  ComplexGrid transfer = ComplexGrid::Zero(h, w);
  for (const auto &e : psf.elements) {
    transfer(wrap(e.dy, h), wrap(e.dx, w)) += e.weight;
  }
  fft2(transfer, false);

  ComplexGrid spectrum = img.cast<std::complex<double>>();
  fft2(spectrum, false);
  spectrum *= transfer.conjugate() / (transfer.abs2() + gamma);
  fft2(spectrum, true);
  return spectrum.real();
}

} // namespace gyrodeblur
