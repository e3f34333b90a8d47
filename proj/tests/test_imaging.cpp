#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "gyrodeblur/image.hpp"
#include "gyrodeblur/synth.hpp"

using namespace gyrodeblur;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "gyrodeblur_test_imaging";
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path write_raw(const std::string &name, const std::string &bytes) {
  const auto path = temp_dir() / name;
  std::ofstream(path, std::ios::binary) << bytes;
  return path;
}

} // namespace

TEST_CASE("PGM: 8-bit round trip is exact") {
  Image img(2, 2);
  img << 0.0F, 85.0F / 255, 170.0F / 255, 1.0F;
  const auto path = temp_dir() / "rt.pgm";
  save_image(img, path);
  const Image back = load_image(path);
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 2);
  CHECK((back == img).all());

  // Out-of-range values are clamped on write.
  Image wild(1, 2);
  wild << -0.5F, 3.0F;
  save_image(wild, path);
  const Image clamped = load_image(path);
  CHECK(clamped(0, 0) == 0.0F);
  CHECK(clamped(0, 1) == 1.0F);
}

TEST_CASE("P5 header with comment and P6 luma") {
  const auto p5 = write_raw("p5.pgm", std::string("P5\n# comment\n3 2\n255\n") + std::string("\x00\x01\x02\x03\x04\xff", 6));
  const Image g = load_image(p5);
  CHECK(g.cols() == 3);
  CHECK(g.rows() == 2);
  CHECK(g(1, 2) == 1.0F);
  CHECK(g(0, 1) == doctest::Approx(1.0 / 255));

  const auto p6 = write_raw("p6.ppm", std::string("P6 1 1 255\n") + std::string("\xff\x00\x00", 3));
  CHECK(load_image(p6)(0, 0) == doctest::Approx(0.299).epsilon(0.5 / 255));
}

TEST_CASE("image loading errors") {
  CHECK_THROWS(load_image(temp_dir() / "missing.pgm"));
  CHECK_THROWS(load_image(write_raw("ascii.pgm", "P2 1 1 255\n0\n")));
  CHECK_THROWS(load_image(write_raw("maxval.pgm", "P5 1 1 65535\n\x01\x02")));
  CHECK_THROWS(load_image(write_raw("short.pgm", "P5 4 4 255\n\x01\x02")));
  CHECK_THROWS(load_image(write_raw("nodims.pgm", "P5 4\n")));
  CHECK_THROWS(load_image(write_raw("empty.pgm", "P5 0 4 255\n")));
}

TEST_CASE("psnr: identical, 20 dB and symmetry") {
  const Image a = Image::Zero(8, 8);
  const Image b = Image::Constant(8, 8, 0.1F);
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
  const Image c = load_image(TEST_DATA_DIR "/coffee.pgm");
  const Image d = synth_blur(c, 10.0, 5, 3, 25.0);
  CHECK(psnr(c, d) == psnr(d, c));
  CHECK_THROWS_AS((void)psnr(a, Image::Zero(8, 9)), std::invalid_argument);
}

TEST_CASE("synth_blur: r = 1 without noise is the identity") {
  const Image img = load_image(TEST_DATA_DIR "/astronaut.pgm");
  for (double theta : {0.0, 37.0, 90.0, 151.0}) {
    CHECK((synth_blur(img, theta, 1, 0, std::nullopt) == img).all());
  }
  CHECK_THROWS_AS(synth_blur(img, 0.0, 0, 0, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(synth_blur(img, 200.0, 5, 0, std::nullopt), std::invalid_argument);
}

TEST_CASE("synth_blur: bit-deterministic per seed and thread count") {
  const Image img = load_image(TEST_DATA_DIR "/camera.pgm");
  const Image a = synth_blur(img, 30.0, 27, 42, 30.0, 1);
  CHECK((synth_blur(img, 30.0, 27, 42, 30.0, 3) == a).all());
  CHECK((synth_blur(img, 30.0, 27, 42, 30.0, 8) == a).all());
  CHECK_FALSE((synth_blur(img, 30.0, 27, 43, 30.0, 1) == a).all());

  // Signal-relative noise level: recovered SNR is near the requested 30 dB.
  const Image clean = synth_blur(img, 30.0, 27, 42, std::nullopt);
  const Imaged noise = a.cast<double>() - clean.cast<double>();
  const double snr = 10 * std::log10(clean.cast<double>().square().mean() / noise.square().mean());
  CHECK(snr == doctest::Approx(30.0).epsilon(0.02));
}

TEST_CASE("counter_normal: moments and independence of call order") {
  double m = 0;
  double v = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = counter_normal(9, static_cast<std::uint64_t>(i));
    m += z;
    v += z * z;
  }
  m /= n;
  v = v / n - m * m;
  CHECK(std::abs(m) < 0.01);
  CHECK(std::abs(v - 1.0) < 0.02);
  CHECK(counter_normal(9, 12345) == counter_normal(9, 12345));
}

TEST_CASE("forward PSF sums to one for every angle and extent") {
  for (int r = 1; r <= 60; r += 7) {
    for (int theta = 0; theta < 180; ++theta) {
      CHECK(std::abs(motion_psf(theta, r).sum() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("synth_blur: theta 0 matches a brute-force box filter") {
  const Image img = load_image(TEST_DATA_DIR "/rocket.pgm").topLeftCorner(40, 90);
  const Image out = synth_blur(img, 0.0, 6, 0, std::nullopt);
  const auto taps = centered_box_taps(6);
  const int half = static_cast<int>(taps.size() / 2);
  double worst = 0;
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 90; ++x) {
      double acc = 0;
      for (int i = 0; i < static_cast<int>(taps.size()); ++i) {
        acc += taps[static_cast<std::size_t>(i)] * img(y, std::clamp(x - (i - half), 0, 89));
      }
      worst = std::max(worst, std::abs(acc - out(y, x)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("psnr of a blurred image decreases with extent") {
  const Image img = load_image(TEST_DATA_DIR "/chelsea.pgm");
  double previous = std::numeric_limits<double>::infinity();
  for (int r : {3, 9, 15, 27, 47}) {
    const double p = psnr(img, synth_blur(img, 60.0, r, 0, std::nullopt));
    CHECK(p < previous);
    previous = p;
  }
}

TEST_CASE("frequency_wiener_reference: identity PSF and constant image") {
  const Image img = load_image(TEST_DATA_DIR "/gravel.pgm").topLeftCorner(64, 80);
  const Image id = frequency_wiener_reference(img, 0.0, 1, 0.01);
  CHECK(((id - img / 1.01F).abs() < 1e-6F).all());

  const Imaged flat = Imaged::Constant(48, 64, 0.6);
  for (double theta : {0.0, 20.0, 110.0}) {
    const Imaged out = frequency_wiener_reference(flat, theta, 9, 0.01);
    CHECK(((out - 0.6 / 1.01).abs() < 1e-12).all());
  }
  CHECK_THROWS_AS(frequency_wiener_reference(flat, 0.0, 9, 0.0), std::invalid_argument);
}

TEST_CASE("frequency_wiener_reference: undoes a circular blur up to the regularizer") {
  // Circularly blurred impulse: the reference output is the Wiener response to
  // |H|^2, which concentrates at the impulse with gain close to one.
  Imaged img = Imaged::Zero(64, 64);
  img(32, 32) = 1.0;
  const SparseKernel psf = motion_psf(20.0, 7);
  Imaged blurred = Imaged::Zero(64, 64);
  for (const auto &e : psf.elements) {
    blurred(32 + e.dy, 32 + e.dx) += e.weight;
  }
  const Imaged out = frequency_wiener_reference(blurred, 20.0, 7, 1e-6);
  Eigen::Index my = 0;
  Eigen::Index mx = 0;
  out.maxCoeff(&my, &mx);
  CHECK(my == 32);
  CHECK(mx == 32);
  CHECK(out(32, 32) > 0.9);
  CHECK(out.sum() == doctest::Approx(1.0 / (1.0 + 1e-6)));
}
