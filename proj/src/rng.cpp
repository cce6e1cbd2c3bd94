#include "skycomp/rng.hpp"

#include <cmath>

#include "skycomp/errors.hpp"

namespace skycomp {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> round_once(
    const std::array<std::uint32_t, 4>& c,
    const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

std::uint64_t make_stream(StreamPurpose purpose, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
  if (a >= (1ull << 16) || b >= (1ull << 12) || c >= (1ull << 32)) {
    throw ConfigError("rng stream index out of range");
  }
  return (static_cast<std::uint64_t>(purpose) << 60) | (a << 44) | (b << 32) |
         c;
}

std::array<std::uint32_t, 4> PhiloxRng::block(
    const std::array<std::uint32_t, 4>& counter,
    const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> c = counter;
  std::array<std::uint32_t, 2> k = key;
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    c = round_once(c, k);
  }
  return c;
}

PhiloxRng::PhiloxRng(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed),
           static_cast<std::uint32_t>(seed >> 32)},
      stream_(stream) {}

void PhiloxRng::refill() {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(position_),
      static_cast<std::uint32_t>(position_ >> 32),
      static_cast<std::uint32_t>(stream_),
      static_cast<std::uint32_t>(stream_ >> 32)};
  buffer_ = block(counter, key_);
  ++position_;
  buffer_pos_ = 0;
}

std::uint32_t PhiloxRng::next_u32() {
  if (buffer_pos_ >= 4) refill();
  return buffer_[buffer_pos_++];
}

double PhiloxRng::uniform() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  const std::uint64_t bits = (hi << 32) | lo;
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double PhiloxRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double PhiloxRng::angle() {
  return 2.0 * M_PI * uniform();
}

double PhiloxRng::gaussian() {
  if (has_gauss_cache_) {
    has_gauss_cache_ = false;
    return gauss_cache_;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double r = std::sqrt(-2.0 * std::log(1.0 - uniform()));
  const double theta = angle();
  gauss_cache_ = r * std::sin(theta);
  has_gauss_cache_ = true;
  return r * std::cos(theta);
}

std::complex<double> PhiloxRng::cgaussian(double variance) {
  const double s = std::sqrt(variance / 2.0);
  const double re = gaussian();
  const double im = gaussian();
  return {s * re, s * im};
}

}  // namespace skycomp
