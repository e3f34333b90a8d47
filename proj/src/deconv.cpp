#include "gyrodeblur/deconv.hpp"

#include <unsupported/Eigen/FFT>

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace gyrodeblur {

Psf1D build_psf_1d(int extent) {
  if (extent < kMinBankExtent) {
    throw std::invalid_argument("build_psf_1d: extent must be >= 2, got " + std::to_string(extent));
  }
  return {centered_box_taps(extent), extent};
}

std::vector<double> wiener_inverse_1d(const Psf1D &psf, double gamma) {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("wiener_inverse_1d: gamma must be > 0");
  }
  const std::size_t n = psf.taps.size();
  if (n == 0 || n % 2 == 0) {
    throw std::invalid_argument("wiener_inverse_1d: PSF length must be odd");
  }
  const std::size_t center = n / 2;

  std::vector<std::complex<double>> h(n);
  for (std::size_t k = 0; k < n; ++k) {
    h[k] = psf.taps[(k + center) % n];
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, h);
  for (auto &f : spectrum) {
    f = std::conj(f) / (std::norm(f) + gamma);
  }
  std::vector<std::complex<double>> w_circ;
  fft.inv(w_circ, spectrum);

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::complex<double> v = w_circ[(i + n - center) % n];
    if (std::abs(v.imag()) > 1e-9) {
      throw std::logic_error("wiener_inverse_1d: non-negligible imaginary residue");
    }
    w[i] = v.real();
  }
  return w;
}

SparseKernel rasterize_kernel_2d(std::span<const double> weights, double theta_deg) {
  return rasterize_line(weights, theta_deg);
}

KernelBank::KernelBank(int r_max, double gamma, std::vector<InverseKernel> kernels)
    : r_max_(r_max), gamma_(gamma), kernels_(std::move(kernels)) {
  if (r_max < kMinBankExtent) {
    throw std::invalid_argument("kernel bank: r_max must be >= 2");
  }
  const std::size_t expected = static_cast<std::size_t>(kBankAngles) *
                               static_cast<std::size_t>(r_max - kMinBankExtent + 1);
  if (kernels_.size() != expected) {
    throw std::invalid_argument("kernel bank: expected " + std::to_string(expected) + " kernels, got " +
                                std::to_string(kernels_.size()));
  }
}

const InverseKernel &KernelBank::at(int theta_deg, int extent) const {
  if (theta_deg < 0 || theta_deg >= kBankAngles || extent < kMinBankExtent || extent > r_max_) {
    throw std::out_of_range("kernel bank: no entry for theta " + std::to_string(theta_deg) +
                            ", extent " + std::to_string(extent));
  }
  const std::size_t rows = static_cast<std::size_t>(r_max_ - kMinBankExtent + 1);
  return kernels_[static_cast<std::size_t>(theta_deg) * rows +
                  static_cast<std::size_t>(extent - kMinBankExtent)];
}

const InverseKernel &KernelBank::nearest(const BlurVector &blur, bool *clamped) const {
  const int theta = static_cast<int>(std::lround(blur.theta_deg)) % kBankAngles;
  long extent = std::lround(blur.extent);
  const bool over = extent > r_max_;
  if (clamped != nullptr) {
    *clamped = over;
  }
  extent = std::clamp<long>(extent, kMinBankExtent, r_max_);
  return at(theta, static_cast<int>(extent));
}

std::size_t KernelBank::max_elements() const {
  std::size_t m = 0;
  for (const auto &k : kernels_) {
    m = std::max(m, k.kernel.elements.size());
  }
  return m;
}

KernelBank build_bank(int r_max, double gamma, unsigned threads) {
  if (r_max < kMinBankExtent) {
    throw std::invalid_argument("build_bank: r_max must be >= 2");
  }
  const std::size_t rows = static_cast<std::size_t>(r_max - kMinBankExtent + 1);
  std::vector<std::vector<double>> inverses(rows);
  for (std::size_t j = 0; j < rows; ++j) {
    inverses[j] = wiener_inverse_1d(build_psf_1d(static_cast<int>(j) + kMinBankExtent), gamma);
  }

  std::vector<InverseKernel> kernels(static_cast<std::size_t>(kBankAngles) * rows);
  parallel_for(kernels.size(), threads, [&](std::size_t i) {
    const int theta = static_cast<int>(i / rows);
    const std::size_t j = i % rows;
    InverseKernel &k = kernels[i];
    k.kernel = rasterize_kernel_2d(inverses[j], theta);
    k.theta_deg = theta;
    k.extent = static_cast<int>(j) + kMinBankExtent;
    k.gamma = gamma;
  });
  return KernelBank(r_max, gamma, std::move(kernels));
}

// ---------------------------------------------------------------------------
// Cache file
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'I', 'D', 'B', 'K', '1'};

std::uint64_t fnv1a(const unsigned char *data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
public:
  void bytes(const void *p, std::size_t n) {
    const auto *c = static_cast<const unsigned char *>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename U> void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf_.push_back(static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xffu));
    }
  }
  void i16(int v) { uint(static_cast<std::uint16_t>(static_cast<std::int16_t>(v))); }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  std::vector<unsigned char> &buffer() { return buf_; }

private:
  std::vector<unsigned char> buf_;
};

class Reader {
public:
  Reader(const std::vector<unsigned char> &buf, std::size_t end) : buf_(buf), end_(end) {}

  template <typename U> U uint() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  int i16() { return static_cast<std::int16_t>(uint<std::uint16_t>()); }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  void need(std::size_t n) const {
    if (pos_ + n > end_) {
      throw std::runtime_error("kernel bank file truncated");
    }
  }
  [[nodiscard]] std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

private:
  const std::vector<unsigned char> &buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

} // namespace

void save_bank(const KernelBank &bank, const std::filesystem::path &path) {
  if (bank.empty()) {
    throw std::invalid_argument("save_bank: empty bank");
  }
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.uint(static_cast<std::uint32_t>(bank.r_max()));
  w.f64(bank.gamma());
  for (const auto &k : bank.kernels()) {
    w.uint(static_cast<std::uint32_t>(k.kernel.elements.size()));
    for (const auto &e : k.kernel.elements) {
      if (e.dx < INT16_MIN || e.dx > INT16_MAX || e.dy < INT16_MIN || e.dy > INT16_MAX) {
        throw std::out_of_range("save_bank: kernel offset exceeds int16");
      }
      w.i16(e.dx);
      w.i16(e.dy);
      w.f32(static_cast<float>(e.weight));
    }
  }
  const std::uint64_t sum = fnv1a(w.buffer().data(), w.buffer().size());
  w.uint(sum);

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write kernel bank " + path.string());
  }
  out.write(reinterpret_cast<const char *>(w.buffer().data()),
            static_cast<std::streamsize>(w.buffer().size()));
  if (!out) {
    throw std::runtime_error("failed writing kernel bank " + path.string());
  }
}

KernelBank load_bank(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open kernel bank " + path.string());
  }
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t header = sizeof(kMagic) + 4 + 8;
  if (buf.size() < header + 8) {
    throw std::runtime_error("kernel bank file truncated: " + path.string());
  }
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a kernel bank file (bad magic): " + path.string());
  }
  const std::size_t body = buf.size() - 8;
  Reader tail(buf, buf.size());
  tail.seek(body);
  if (tail.uint<std::uint64_t>() != fnv1a(buf.data(), body)) {
    throw std::runtime_error("kernel bank checksum mismatch (corrupt or truncated): " + path.string());
  }

  Reader r(buf, body);
  r.seek(sizeof(kMagic));
  const auto r_max = static_cast<int>(r.uint<std::uint32_t>());
  const double gamma = r.f64();
  if (r_max < kMinBankExtent || r_max > 4096 || !(gamma > 0.0)) {
    throw std::runtime_error("kernel bank header out of range: " + path.string());
  }

  const std::size_t rows = static_cast<std::size_t>(r_max - kMinBankExtent + 1);
  std::vector<InverseKernel> kernels(static_cast<std::size_t>(kBankAngles) * rows);
  const double dc = 1.0 / (1.0 + gamma);
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    InverseKernel &k = kernels[i];
    k.theta_deg = static_cast<int>(i / rows);
    k.extent = static_cast<int>(i % rows) + kMinBankExtent;
    k.gamma = gamma;
    const auto count = r.uint<std::uint32_t>();
    r.need(static_cast<std::size_t>(count) * 8);
    k.kernel.elements.resize(count);
    for (auto &e : k.kernel.elements) {
      e.dx = r.i16();
      e.dy = r.i16();
      e.weight = r.f32();
    }
    if (std::abs(k.kernel.sum() - dc) > kLoadedDcTolerance) {
      throw std::runtime_error("kernel bank DC gain check failed for theta " + std::to_string(k.theta_deg) +
                               ", extent " + std::to_string(k.extent));
    }
  }
  if (r.pos() != body) {
    throw std::runtime_error("kernel bank has trailing data: " + path.string());
  }
  return KernelBank(r_max, gamma, std::move(kernels));
}

} // namespace gyrodeblur
