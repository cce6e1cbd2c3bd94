#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace skycomp {

// Labels the independent random-number substreams used across the project.
// Each (purpose, a, b, c) tuple maps to a distinct 64-bit stream id, so
// concurrent consumers (Monte-Carlo trials, per-user mobility, placement
// jitter) never share generator state and results do not depend on
// execution order.
enum class StreamPurpose : std::uint64_t {
  UserTracks = 1,
  UavPlacement = 2,
  McBounds = 3,
  McPlanEval = 4,
  McGeneric = 5,
};

// Packs purpose(4) | a(16) | b(12) | c(32) into a stream id.
std::uint64_t make_stream(StreamPurpose purpose, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c);

// Counter-based Philox4x32-10 generator.  A (seed, stream) pair selects an
// independent sequence; advancing is just incrementing a 64-bit counter, so
// instances are cheap to create per trial and safe to use in parallel loops.
class PhiloxRng {
 public:
  explicit PhiloxRng(std::uint64_t seed, std::uint64_t stream = 0);

  // One keyed block permutation; exposed for the reference-vector tests.
  static std::array<std::uint32_t, 4> block(
      const std::array<std::uint32_t, 4>& counter,
      const std::array<std::uint32_t, 2>& key);

  std::uint32_t next_u32();

  // Uniform on [0,1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform angle on [0, 2*pi).
  double angle();
  // Standard normal (Box-Muller, pair cached).
  double gaussian();
  // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> cgaussian(double variance);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_ = 0;
  std::uint64_t position_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffer_pos_ = 4;
  double gauss_cache_ = 0.0;
  bool has_gauss_cache_ = false;
};

}  // namespace skycomp
