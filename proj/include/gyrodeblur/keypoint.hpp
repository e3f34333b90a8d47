#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace gyrodeblur {

/// Detected feature: sub-pixel position, detection radius and detector strength.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double scale = 1.0;
  double response = 0.0;
};

/// CSV with header `x,y,scale,response`.
std::vector<Keypoint> load_keypoints_csv(const std::filesystem::path &path);
void save_keypoints_csv(const std::vector<Keypoint> &kps, const std::filesystem::path &path);

/// Strongest `count` keypoints by descending response, ties by (y, x).
std::vector<Keypoint> truncate_by_response(std::vector<Keypoint> kps, std::size_t count);

} // namespace gyrodeblur
