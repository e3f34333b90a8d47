#include "gyrodeblur/keypoint.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gyrodeblur {

std::vector<Keypoint> load_keypoints_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open keypoints " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty keypoint file " + path.string());
  }
  line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }),
             line.end());
  if (line != "x,y,scale,response") {
    throw std::runtime_error("keypoint header must be x,y,scale,response in " + path.string());
  }
  std::vector<Keypoint> kps;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    Keypoint k;
    std::string extra;
    if (!(fields >> k.x >> k.y >> k.scale >> k.response) || (fields >> extra)) {
      throw std::runtime_error("malformed keypoint row at line " + std::to_string(line_no) + " of " +
                               path.string());
    }
    if (!(k.scale > 0.0) || !std::isfinite(k.x) || !std::isfinite(k.y) || !std::isfinite(k.scale) ||
        !std::isfinite(k.response)) {
      throw std::runtime_error("invalid keypoint at line " + std::to_string(line_no) + " of " + path.string());
    }
    kps.push_back(k);
  }
  return kps;
}

void save_keypoints_csv(const std::vector<Keypoint> &kps, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write keypoints " + path.string());
  }
  out << "x,y,scale,response\n" << std::setprecision(12);
  for (const auto &k : kps) {
    out << k.x << ',' << k.y << ',' << k.scale << ',' << k.response << '\n';
  }
}

std::vector<Keypoint> truncate_by_response(std::vector<Keypoint> kps, std::size_t count) {
  std::stable_sort(kps.begin(), kps.end(), [](const Keypoint &a, const Keypoint &b) {
    if (a.response != b.response) {
      return a.response > b.response;
    }
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  if (kps.size() > count) {
    kps.resize(count);
  }
  return kps;
}

} // namespace gyrodeblur
