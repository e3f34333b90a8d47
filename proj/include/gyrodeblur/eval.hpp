#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gyrodeblur/image.hpp"
#include "gyrodeblur/keypoint.hpp"

namespace gyrodeblur {

/// Plane-to-plane mapping, normalized so H(2,2) == 1 whenever it is nonzero.
class Homography {
public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Homography(const Eigen::Matrix3d &m);

  [[nodiscard]] static Homography identity() { return {}; }

  [[nodiscard]] const Eigen::Matrix3d &matrix() const { return m_; }
  [[nodiscard]] Eigen::Vector2d apply(const Eigen::Vector2d &p) const;
  [[nodiscard]] Homography inverse() const;
  /// sqrt(|det J|) of the mapping at p: how much a small circle's radius scales.
  [[nodiscard]] double local_scale(const Eigen::Vector2d &p) const;

private:
  Eigen::Matrix3d m_;
};

/// Nine whitespace-separated numbers, row-major.
Homography load_homography(const std::filesystem::path &path);
void save_homography(const Homography &h, const std::filesystem::path &path);

/// Intersection-over-union of two discs.
double circle_iou(const Eigen::Vector2d &c1, double r1, const Eigen::Vector2d &c2, double r2);

struct KeypointMatch {
  std::size_t a = 0;
  std::size_t b = 0;
  double overlap = 0.0;
};

/*
 * Greedy one-to-one matching by descending circle overlap.
 *
 * Keypoints of A are mapped into B through `h`, their radii scaled by the
 * local scale of `h`. Pairs below `overlap_min` are never matched. Ties in
 * overlap resolve by (a, b) index so the result is deterministic.
 */
std::vector<KeypointMatch> match_keypoints(const std::vector<Keypoint> &ka, const std::vector<Keypoint> &kb,
                                           const Homography &h, double overlap_min);

/// Matches / min(|A|, |B|) under the overlap criterion.
double repeatability(const std::vector<Keypoint> &ka, const std::vector<Keypoint> &kb, const Homography &h,
                     double overlap_min);

/// Mean distance in A's frame between matched pairs; empty when nothing matches.
std::optional<double> localization_error(const std::vector<Keypoint> &ka, const std::vector<Keypoint> &kb,
                                         const Homography &h, double overlap_min);

/// Keypoints of A whose projection through `h` lands at least `margin` px inside a w x h image.
std::vector<Keypoint> visible_in(const std::vector<Keypoint> &ka, const Homography &h, int width, int height,
                                 double margin);

/// Normalized DLT on all correspondences (least squares when more than four).
Eigen::Matrix3d homography_dlt(std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b);

struct RansacOptions {
  double inlier_px = 2.0;
  std::uint64_t seed = 0;
  int max_iterations = 2000;
  double confidence = 0.999;
};

struct RansacResult {
  Homography h;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
  int iterations = 0;
};

/*
 * RANSAC over 4-point normalized-DLT hypotheses.
 *
 * A correspondence is an inlier when the RMS of its forward and backward
 * transfer distances is below inlier_px. Samples with three collinear points
 * are redrawn. The best hypothesis is refit on all its inliers.
 */
RansacResult estimate_homography_ransac(std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b,
                                        const RansacOptions &opts = {});

/// Midpoints of index-aligned tracks; scales combine by geometric mean.
std::vector<Keypoint> interpolate_tracks(const std::vector<Keypoint> &first, const std::vector<Keypoint> &last);

struct ToyDetectorOptions {
  std::size_t max_count = std::numeric_limits<std::size_t>::max();
  /// Minimum Harris response for a detection (always strictly positive).
  double threshold = 0.0;
  double harris_k = 0.04;
  double window_sigma = 1.5;
  double scale = 4.0;
};

/*
 * Harris corner detector used as a self-contained stand-in for external
 * detectors: central-difference gradients, Gaussian-weighted structure
 * tensor, 3x3 non-maximum suppression and quadratic sub-pixel refinement.
 * Output is sorted by response, ties by (y, x).
 */
std::vector<Keypoint> toy_detect(const Image &img, const ToyDetectorOptions &opts = {});

} // namespace gyrodeblur
