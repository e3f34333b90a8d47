#include "gyrodeblur/eval.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace gyrodeblur {

// ---------------------------------------------------------------------------
// Homography
// ---------------------------------------------------------------------------

Homography::Homography(const Eigen::Matrix3d &m) : m_(m) {
  if (!m.allFinite()) {
    throw std::invalid_argument("homography: non-finite entries");
  }
  if (m_(2, 2) != 0.0) {
    m_ /= m_(2, 2);
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m_);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s(2) > 0.0) || s(0) / s(2) > 1e12) {
    throw std::invalid_argument("homography: singular matrix");
  }
}

Eigen::Vector2d Homography::apply(const Eigen::Vector2d &p) const {
  const Eigen::Vector3d q = m_ * p.homogeneous();
  return q.hnormalized();
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

double Homography::local_scale(const Eigen::Vector2d &p) const {
  const double w = m_.row(2).dot(p.homogeneous());
  return std::sqrt(std::abs(m_.determinant() / (w * w * w)));
}

Homography load_homography(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open homography " + path.string());
  }
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) {
    if (!(in >> m(i / 3, i % 3))) {
      throw std::runtime_error("homography file needs 9 numbers: " + path.string());
    }
  }
  std::string extra;
  if (in >> extra) {
    throw std::runtime_error("homography file has trailing data: " + path.string());
  }
  return Homography(m);
}

void save_homography(const Homography &h, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write homography " + path.string());
  }
  out << std::setprecision(17);
  for (int r = 0; r < 3; ++r) {
    out << h.matrix()(r, 0) << ' ' << h.matrix()(r, 1) << ' ' << h.matrix()(r, 2) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Repeatability
// ---------------------------------------------------------------------------

double circle_iou(const Eigen::Vector2d &c1, double r1, const Eigen::Vector2d &c2, double r2) {
  const double d = (c1 - c2).norm();
  const double a1 = std::numbers::pi * r1 * r1;
  const double a2 = std::numbers::pi * r2 * r2;
  if (d >= r1 + r2) {
    return 0.0;
  }
  double inter = 0.0;
  if (d <= std::abs(r1 - r2)) {
    inter = std::min(a1, a2);
  } else {
    const double alpha = std::acos(std::clamp((d * d + r1 * r1 - r2 * r2) / (2 * d * r1), -1.0, 1.0));
    const double beta = std::acos(std::clamp((d * d + r2 * r2 - r1 * r1) / (2 * d * r2), -1.0, 1.0));
    const double k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    inter = r1 * r1 * alpha + r2 * r2 * beta - 0.5 * std::sqrt(std::max(k, 0.0));
  }
  return inter / (a1 + a2 - inter);
}

std::vector<KeypointMatch> match_keypoints(const std::vector<Keypoint> &ka, const std::vector<Keypoint> &kb,
                                           const Homography &h, double overlap_min) {
  if (!(overlap_min > 0.0 && overlap_min < 1.0)) {
    throw std::invalid_argument("overlap threshold must lie in (0, 1)");
  }
  std::vector<KeypointMatch> candidates;
  for (std::size_t i = 0; i < ka.size(); ++i) {
    const Eigen::Vector2d pa(ka[i].x, ka[i].y);
    const Eigen::Vector2d projected = h.apply(pa);
    const double radius = ka[i].scale * h.local_scale(pa);
    for (std::size_t j = 0; j < kb.size(); ++j) {
      const Eigen::Vector2d pb(kb[j].x, kb[j].y);
      if ((projected - pb).norm() >= radius + kb[j].scale) {
        continue;
      }
      const double o = circle_iou(projected, radius, pb, kb[j].scale);
      if (o >= overlap_min) {
        candidates.push_back({i, j, o});
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const KeypointMatch &x, const KeypointMatch &y) { return x.overlap > y.overlap; });

  std::vector<bool> used_a(ka.size(), false);
  std::vector<bool> used_b(kb.size(), false);
  std::vector<KeypointMatch> matches;
  for (const auto &c : candidates) {
    if (used_a[c.a] || used_b[c.b]) {
      continue;
    }
    used_a[c.a] = true;
    used_b[c.b] = true;
    matches.push_back(c);
  }
  return matches;
}

double repeatability(const std::vector<Keypoint> &ka, const std::vector<Keypoint> &kb, const Homography &h,
                     double overlap_min) {
  if (ka.empty() || kb.empty()) {
    throw std::invalid_argument("repeatability: empty keypoint list");
  }
  const auto matches = match_keypoints(ka, kb, h, overlap_min);
  return static_cast<double>(matches.size()) / static_cast<double>(std::min(ka.size(), kb.size()));
}

std::optional<double> localization_error(const std::vector<Keypoint> &ka, const std::vector<Keypoint> &kb,
                                         const Homography &h, double overlap_min) {
  if (ka.empty() || kb.empty()) {
    throw std::invalid_argument("localization_error: empty keypoint list");
  }
  const auto matches = match_keypoints(ka, kb, h, overlap_min);
  if (matches.empty()) {
    return std::nullopt;
  }
  const Homography inv = h.inverse();
  double total = 0.0;
  for (const auto &m : matches) {
    const Eigen::Vector2d back = inv.apply({kb[m.b].x, kb[m.b].y});
    total += (back - Eigen::Vector2d(ka[m.a].x, ka[m.a].y)).norm();
  }
  return total / static_cast<double>(matches.size());
}

std::vector<Keypoint> visible_in(const std::vector<Keypoint> &ka, const Homography &h, int width, int height,
                                 double margin) {
  std::vector<Keypoint> out;
  for (const auto &k : ka) {
    const Eigen::Vector2d p = h.apply({k.x, k.y});
    if (p.x() >= margin && p.y() >= margin && p.x() <= width - 1 - margin && p.y() <= height - 1 - margin) {
      out.push_back(k);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Homography estimation
// ---------------------------------------------------------------------------

namespace {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Eigen::Matrix3d normalizer(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto &p : pts) {
    mean += p;
  }
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto &p : pts) {
    dist += (p - mean).norm();
  }
  dist /= static_cast<double>(pts.size());
  const double s = dist > 0.0 ? std::numbers::sqrt2 / dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
  return t;
}

bool collinear(const Eigen::Vector2d &a, const Eigen::Vector2d &b, const Eigen::Vector2d &c) {
  const Eigen::Vector2d u = b - a;
  const Eigen::Vector2d v = c - a;
  const double area = std::abs(u.x() * v.y() - u.y() * v.x());
  const double scale = std::max(u.squaredNorm(), v.squaredNorm());
  return area <= 1e-9 * scale;
}

bool degenerate_sample(std::span<const Eigen::Vector2d> pts) {
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      for (std::size_t k = j + 1; k < 4; ++k) {
        if (collinear(pts[i], pts[j], pts[k])) {
          return true;
        }
      }
    }
  }
  return false;
}

double symmetric_transfer_sq(const Eigen::Matrix3d &h, const Eigen::Matrix3d &h_inv, const Eigen::Vector2d &a,
                             const Eigen::Vector2d &b) {
  const Eigen::Vector3d fa = h * a.homogeneous();
  const Eigen::Vector3d bb = h_inv * b.homogeneous();
  if (std::abs(fa.z()) < 1e-15 || std::abs(bb.z()) < 1e-15) {
    return std::numeric_limits<double>::infinity();
  }
  return 0.5 * ((fa.hnormalized() - b).squaredNorm() + (bb.hnormalized() - a).squaredNorm());
}

} // namespace

Eigen::Matrix3d homography_dlt(std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("homography_dlt: correspondence count mismatch");
  }
  if (a.size() < 4) {
    throw std::invalid_argument("homography_dlt: need at least 4 correspondences");
  }
  const Eigen::Matrix3d ta = normalizer(a);
  const Eigen::Matrix3d tb = normalizer(b);
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d p = ta * a[static_cast<std::size_t>(i)].homogeneous();
    const Eigen::Vector3d q = tb * b[static_cast<std::size_t>(i)].homogeneous();
    design.row(2 * i) << 0, 0, 0, -q.z() * p.x(), -q.z() * p.y(), -q.z() * p.z(), q.y() * p.x(), q.y() * p.y(),
        q.y() * p.z();
    design.row(2 * i + 1) << q.z() * p.x(), q.z() * p.y(), q.z() * p.z(), 0, 0, 0, -q.x() * p.x(),
        -q.x() * p.y(), -q.x() * p.z();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d out = tb.inverse() * hn * ta;
  if (out(2, 2) != 0.0) {
    out /= out(2, 2);
  }
  return out;
}

RansacResult estimate_homography_ransac(std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b,
                                        const RansacOptions &opts) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("ransac: correspondence count mismatch");
  }
  if (a.size() < 4) {
    throw std::invalid_argument("ransac: need at least 4 correspondences");
  }
  if (!(opts.inlier_px > 0.0)) {
    throw std::invalid_argument("ransac: inlier threshold must be > 0");
  }
  const std::size_t n = a.size();
  const double thresh_sq = opts.inlier_px * opts.inlier_px;
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  auto score = [&](const Eigen::Matrix3d &h, std::vector<bool> &mask) {
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(h);
    if (!lu.isInvertible()) {
      return std::size_t{0};
    }
    const Eigen::Matrix3d h_inv = lu.inverse();
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mask[i] = symmetric_transfer_sq(h, h_inv, a[i], b[i]) < thresh_sq;
      count += mask[i] ? 1 : 0;
    }
    return count;
  };

  RansacResult best;
  best.inliers.assign(n, false);
  std::vector<bool> mask(n, false);
  std::array<Eigen::Vector2d, 4> sa;
  std::array<Eigen::Vector2d, 4> sb;
  int needed = opts.max_iterations;
  int draws = 0;
  const int max_draws = 20 * opts.max_iterations + 100;

  while (best.iterations < needed && draws < max_draws) {
    ++draws;
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t candidate = 0;
      do {
        candidate = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), candidate) !=
               idx.begin() + static_cast<std::ptrdiff_t>(k));
      idx[k] = candidate;
      sa[k] = a[candidate];
      sb[k] = b[candidate];
    }
    if (degenerate_sample(sa) || degenerate_sample(sb)) {
      continue;
    }
    ++best.iterations;
    const Eigen::Matrix3d h = homography_dlt(sa, sb);
    if (!h.allFinite()) {
      continue;
    }
    const std::size_t count = score(h, mask);
    if (count > best.inlier_count) {
      best.inlier_count = count;
      best.inliers = mask;
      best.h = Homography(h);
      const double ratio = static_cast<double>(count) / static_cast<double>(n);
      const double miss = 1.0 - std::pow(ratio, 4);
      if (miss <= 0.0) {
        needed = best.iterations;
      } else {
        const double k = std::log(1.0 - opts.confidence) / std::log(miss);
        needed = std::min(opts.max_iterations, static_cast<int>(std::ceil(k)));
      }
    }
  }
  if (best.inlier_count < 4) {
    throw std::runtime_error("ransac: no model with at least 4 inliers");
  }

  std::vector<Eigen::Vector2d> ia;
  std::vector<Eigen::Vector2d> ib;
  for (std::size_t i = 0; i < n; ++i) {
    if (best.inliers[i]) {
      ia.push_back(a[i]);
      ib.push_back(b[i]);
    }
  }
  const Eigen::Matrix3d refit = homography_dlt(ia, ib);
  std::vector<bool> refit_mask(n, false);
  const std::size_t refit_count = score(refit, refit_mask);
  if (refit_count >= best.inlier_count) {
    best.h = Homography(refit);
    best.inliers = std::move(refit_mask);
    best.inlier_count = refit_count;
  }
  return best;
}

std::vector<Keypoint> interpolate_tracks(const std::vector<Keypoint> &first, const std::vector<Keypoint> &last) {
  if (first.size() != last.size()) {
    throw std::invalid_argument("interpolate_tracks: track lists differ in length");
  }
  std::vector<Keypoint> mid(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    mid[i].x = 0.5 * (first[i].x + last[i].x);
    mid[i].y = 0.5 * (first[i].y + last[i].y);
    mid[i].scale = std::sqrt(first[i].scale * last[i].scale);
    mid[i].response = 0.5 * (first[i].response + last[i].response);
  }
  return mid;
}

// ---------------------------------------------------------------------------
// Toy detector
// ---------------------------------------------------------------------------

namespace {

Imaged gaussian_smooth(const Imaged &img, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> g(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    g[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += g[static_cast<std::size_t>(i + radius)];
  }
  for (auto &v : g) {
    v /= sum;
  }
  const Eigen::Index h = img.rows();
  const Eigen::Index w = img.cols();
  Imaged tmp(h, w);
  Imaged out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += g[static_cast<std::size_t>(i + radius)] * img(y, std::clamp<Eigen::Index>(x + i, 0, w - 1));
      }
      tmp(y, x) = acc;
    }
  }
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += g[static_cast<std::size_t>(i + radius)] * tmp(std::clamp<Eigen::Index>(y + i, 0, h - 1), x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

double parabola_offset(double left, double mid, double right) {
  const double denom = left - 2.0 * mid + right;
  if (denom >= 0.0) {
    return 0.0;
  }
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

} // namespace

std::vector<Keypoint> toy_detect(const Image &img, const ToyDetectorOptions &opts) {
  const Eigen::Index h = img.rows();
  const Eigen::Index w = img.cols();
  if (h < 16 || w < 16) {
    throw std::invalid_argument("toy_detect: image must be at least 16x16");
  }
  const Imaged src = img.cast<double>();
  Imaged ixx = Imaged::Zero(h, w);
  Imaged iyy = Imaged::Zero(h, w);
  Imaged ixy = Imaged::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const double gx =
          0.5 * (src(y, std::min<Eigen::Index>(x + 1, w - 1)) - src(y, std::max<Eigen::Index>(x - 1, 0)));
      const double gy =
          0.5 * (src(std::min<Eigen::Index>(y + 1, h - 1), x) - src(std::max<Eigen::Index>(y - 1, 0), x));
      ixx(y, x) = gx * gx;
      iyy(y, x) = gy * gy;
      ixy(y, x) = gx * gy;
    }
  }
  ixx = gaussian_smooth(ixx, opts.window_sigma);
  iyy = gaussian_smooth(iyy, opts.window_sigma);
  ixy = gaussian_smooth(ixy, opts.window_sigma);
  const Imaged response = ixx * iyy - ixy * ixy - opts.harris_k * (ixx + iyy).square();

  const double floor = std::max(opts.threshold, 1e-12);
  const auto border = static_cast<Eigen::Index>(std::ceil(3.0 * opts.window_sigma)) + 1;
  std::vector<Keypoint> kps;
  for (Eigen::Index y = border; y < h - border; ++y) {
    for (Eigen::Index x = border; x < w - border; ++x) {
      const double r = response(y, x);
      if (r <= floor) {
        continue;
      }
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) {
            continue;
          }
          const double n = response(y + dy, x + dx);
          // Plateaus keep only their first pixel in raster order.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (earlier ? n >= r : n > r) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) {
        continue;
      }
      Keypoint k;
      k.x = static_cast<double>(x) + parabola_offset(response(y, x - 1), r, response(y, x + 1));
      k.y = static_cast<double>(y) + parabola_offset(response(y - 1, x), r, response(y + 1, x));
      k.scale = opts.scale;
      k.response = r;
      kps.push_back(k);
    }
  }
  return truncate_by_response(std::move(kps), opts.max_count);
}

} // namespace gyrodeblur
