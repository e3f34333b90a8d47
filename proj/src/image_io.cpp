#include "gyrodeblur/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace gyrodeblur {

namespace {

class HeaderReader {
public:
  explicit HeaderReader(const std::vector<unsigned char> &bytes) : bytes_(bytes) {}

  long next_int(const char *what) {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) {
        throw std::runtime_error(std::string("image header: ") + what + " too large");
      }
      ++pos_;
      ++digits;
    }
    if (digits == 0) {
      throw std::runtime_error(std::string("image header: missing ") + what);
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw std::runtime_error("image header: malformed raster separator");
    }
    return pos_ + 1;
  }

  std::size_t pos_ = 2;

private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
          ++pos_;
        }
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char> &bytes_;
};

} // namespace

Image load_image(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open image " + path.string());
  }
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw std::runtime_error("not a binary PGM/PPM file: " + path.string());
  }
  const bool color = bytes[1] == '6';

  HeaderReader header(bytes);
  const long width = header.next_int("width");
  const long height = header.next_int("height");
  const long maxval = header.next_int("maxval");
  if (width < 1 || height < 1) {
    throw std::runtime_error("image header: empty image");
  }
  if (maxval != 255) {
    throw std::runtime_error("unsupported maxval " + std::to_string(maxval) + " (only 255)");
  }
  const std::size_t offset = header.raster_offset();
  const std::size_t channels = color ? 3 : 1;
  const std::size_t needed = static_cast<std::size_t>(width * height) * channels;
  if (bytes.size() < offset + needed) {
    throw std::runtime_error("truncated image payload in " + path.string());
  }

  Image img(height, width);
  const unsigned char *p = bytes.data() + offset;
  for (long y = 0; y < height; ++y) {
    for (long x = 0; x < width; ++x) {
      if (color) {
        const double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        img(y, x) = static_cast<float>(luma / 255.0);
        p += 3;
      } else {
        img(y, x) = static_cast<float>(*p / 255.0);
        ++p;
      }
    }
  }
  return img;
}

void save_image(const Image &img, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write image " + path.string());
  }
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  std::vector<unsigned char> raster(static_cast<std::size_t>(img.size()));
  std::size_t i = 0;
  for (Eigen::Index y = 0; y < img.rows(); ++y) {
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      const double v = std::clamp(static_cast<double>(img(y, x)), 0.0, 1.0);
      raster[i++] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  out.write(reinterpret_cast<const char *>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
  if (!out) {
    throw std::runtime_error("failed writing image " + path.string());
  }
}

} // namespace gyrodeblur
