#include <doctest.h>

#include <cmath>
#include <set>

#include "skycomp/errors.hpp"
#include "skycomp/rng.hpp"

using namespace skycomp;

TEST_CASE("philox4x32-10 reference vectors") {
  // Known-answer vectors from the Random123 distribution.
  {
    const auto out = PhiloxRng::block({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
  }
  {
    const auto out = PhiloxRng::block(
        {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
        {0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);
  }
  {
    const auto out = PhiloxRng::block(
        {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
        {0xa4093822u, 0x299f31d0u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
  }
}

TEST_CASE("substreams are deterministic and distinct") {
  PhiloxRng a(42, make_stream(StreamPurpose::McGeneric, 1, 2, 3));
  PhiloxRng b(42, make_stream(StreamPurpose::McGeneric, 1, 2, 3));
  PhiloxRng c(42, make_stream(StreamPurpose::McGeneric, 1, 2, 4));
  bool all_equal = true;
  bool any_diff_c = false;
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform();
    all_equal = all_equal && va == b.uniform();
    any_diff_c = any_diff_c || va != c.uniform();
  }
  CHECK(all_equal);
  CHECK(any_diff_c);
}

TEST_CASE("uniform and angle ranges") {
  PhiloxRng rng(7, 0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    const double th = rng.angle();
    REQUIRE(th >= 0.0);
    REQUIRE(th < 2.0 * M_PI);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("gaussian moments") {
  PhiloxRng rng(11, 5);
  const int n = 200000;
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    mean += g;
    m2 += g * g;
  }
  mean /= n;
  m2 /= n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(m2 - 1.0) < 0.02);
}

TEST_CASE("stream packing rejects out-of-range fields") {
  CHECK_THROWS_AS(make_stream(StreamPurpose::McGeneric, 1ull << 16, 0, 0),
                  ConfigError);
  CHECK_THROWS_AS(make_stream(StreamPurpose::McGeneric, 0, 1ull << 12, 0),
                  ConfigError);
  CHECK_THROWS_AS(make_stream(StreamPurpose::McGeneric, 0, 0, 1ull << 32),
                  ConfigError);
}
