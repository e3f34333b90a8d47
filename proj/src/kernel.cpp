#include "gyrodeblur/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gyrodeblur {

namespace {

// cos/sin of whole-degree angles land a few ulps away from 0 and 1.
double snap_unit(double v) {
  if (std::abs(v) < 1e-12) {
    return 0.0;
  }
  if (std::abs(std::abs(v) - 1.0) < 1e-12) {
    return v > 0 ? 1.0 : -1.0;
  }
  return v;
}

} // namespace

double SparseKernel::sum() const {
  double s = 0.0;
  for (const auto &e : elements) {
    s += e.weight;
  }
  return s;
}

int SparseKernel::radius() const {
  int r = 0;
  for (const auto &e : elements) {
    r = std::max({r, std::abs(e.dx), std::abs(e.dy)});
  }
  return r;
}

SparseKernel SparseKernel::transposed() const {
  SparseKernel t;
  t.elements.reserve(elements.size());
  for (const auto &e : elements) {
    t.elements.push_back({e.dy, e.dx, e.weight});
  }
  std::sort(t.elements.begin(), t.elements.end(), [](const auto &a, const auto &b) {
    return a.dy != b.dy ? a.dy < b.dy : a.dx < b.dx;
  });
  return t;
}

std::vector<double> centered_box_taps(int extent) {
  if (extent < 1) {
    throw std::invalid_argument("box extent must be >= 1, got " + std::to_string(extent));
  }
  const int length = 4 * extent + 1;
  const int left = (length - extent) / 2;
  std::vector<double> taps(static_cast<std::size_t>(length), 0.0);
  for (int i = 0; i < extent; ++i) {
    taps[static_cast<std::size_t>(left + i)] = 1.0 / extent;
  }
  return taps;
}

SparseKernel rasterize_line(std::span<const double> weights, double theta_deg,
                            double drop_ratio) {
  if (weights.empty() || weights.size() % 2 == 0) {
    throw std::invalid_argument("rasterize_line needs an odd-length weight array");
  }
  if (!(theta_deg >= 0.0 && theta_deg < 180.0)) {
    throw std::invalid_argument("theta must lie in [0, 180), got " + std::to_string(theta_deg));
  }

  const double rad = theta_deg * std::numbers::pi / 180.0;
  const double c = snap_unit(std::cos(rad));
  const double s = snap_unit(std::sin(rad));
  const bool x_major = std::abs(c) >= std::abs(s);
  const double major = x_major ? c : s;
  const double minor = x_major ? s : c;
  const double slope = minor / major;

  const int half = static_cast<int>(weights.size() / 2);
  std::vector<KernelElement> raw;
  raw.reserve(2 * weights.size());
  auto emit = [&](long a, long b, double w) {
    if (x_major) {
      raw.push_back({static_cast<int>(a), static_cast<int>(b), w});
    } else {
      raw.push_back({static_cast<int>(b), static_cast<int>(a), w});
    }
  };

  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (w == 0.0) {
      continue;
    }
    const double t = static_cast<double>(static_cast<int>(i) - half);
    const long a = std::lround(t * major);
    const double b = static_cast<double>(a) * slope;
    double b0 = std::floor(b);
    double f = b - b0;
    if (f < 1e-9) {
      f = 0.0;
    } else if (f > 1.0 - 1e-9) {
      b0 += 1.0;
      f = 0.0;
    }
    const long lb = static_cast<long>(b0);
    emit(a, lb, (1.0 - f) * w);
    if (f > 0.0) {
      emit(a, lb + 1, f * w);
    }
  }

  std::stable_sort(raw.begin(), raw.end(), [](const auto &p, const auto &q) {
    return p.dy != q.dy ? p.dy < q.dy : p.dx < q.dx;
  });

  SparseKernel kernel;
  for (const auto &e : raw) {
    if (!kernel.elements.empty() && kernel.elements.back().dx == e.dx &&
        kernel.elements.back().dy == e.dy) {
      kernel.elements.back().weight += e.weight;
    } else {
      kernel.elements.push_back(e);
    }
  }

  double peak = 0.0;
  for (const auto &e : kernel.elements) {
    peak = std::max(peak, std::abs(e.weight));
  }
  const double floor_abs = drop_ratio * peak;
  auto dropped = [&](const KernelElement &e) { return std::abs(e.weight) < floor_abs || e.weight == 0.0; };

  // Dropped weight moves to the nearest kept element so the kernel sum is unchanged.
  std::vector<KernelElement> kept;
  std::vector<KernelElement> small;
  for (const auto &e : kernel.elements) {
    (dropped(e) ? small : kept).push_back(e);
  }
  if (!kept.empty()) {
    for (const auto &d : small) {
      std::size_t best = 0;
      long best_d2 = -1;
      for (std::size_t i = 0; i < kept.size(); ++i) {
        const long ddx = kept[i].dx - d.dx;
        const long ddy = kept[i].dy - d.dy;
        const long d2 = ddx * ddx + ddy * ddy;
        if (best_d2 < 0 || d2 < best_d2) {
          best = i;
          best_d2 = d2;
        }
      }
      kept[best].weight += d.weight;
    }
  }
  kernel.elements = std::move(kept);
  return kernel;
}

} // namespace gyrodeblur
