#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <complex>

#include "skycomp/channel.hpp"
#include "skycomp/errors.hpp"

using namespace skycomp;

namespace {

Eigen::MatrixXd random_distances(int m, int k, std::uint64_t seed) {
  PhiloxRng rng(seed, make_stream(StreamPurpose::McGeneric, 7, 0, 0));
  Eigen::MatrixXd d(m, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < m; ++i) d(i, j) = rng.uniform(100.0, 500.0);
  }
  return d;
}

}  // namespace

TEST_CASE("path gain") {
  CHECK(path_gain(1.0, 1e-4) == doctest::Approx(1e-4));
  CHECK(path_gain(100.0, 1e-4) == doctest::Approx(1e-8));
  CHECK(path_gain(10.0, 1.0) == doctest::Approx(1e-2));
  CHECK_THROWS_AS(path_gain(0.0, 1e-4), NumericalError);
}

TEST_CASE("los random phase: deterministic amplitude and repeatability") {
  const Eigen::MatrixXd d = random_distances(4, 3, 1);
  PhiloxRng rng(5, 100);
  const ChannelMatrix h = sample_los_random_phase(d, 1e-4, rng);
  for (int k = 0; k < 3; ++k) {
    for (int m = 0; m < 4; ++m) {
      CHECK(std::norm(h.entries(m, k)) ==
            doctest::Approx(path_gain(d(m, k), 1e-4)).epsilon(1e-12));
    }
  }
  PhiloxRng rng2(5, 100);
  const ChannelMatrix h2 = sample_los_random_phase(d, 1e-4, rng2);
  CHECK(h.entries == h2.entries);
}

TEST_CASE("los random phase: mean phasor vanishes") {
  Eigen::MatrixXd d(1, 1);
  d(0, 0) = 100.0;
  PhiloxRng rng(17, 4);
  std::complex<double> acc(0.0, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const ChannelMatrix h = sample_los_random_phase(d, 1e-4, rng);
    acc += h.entries(0, 0) / std::abs(h.entries(0, 0));
  }
  CHECK(std::abs(acc) / n < 0.02);
}

TEST_CASE("rayleigh: second moments") {
  Eigen::MatrixXd d(1, 1);
  d(0, 0) = 200.0;
  const double tau0 = 1e-4;
  const double var = tau0 / (200.0 * 200.0);
  PhiloxRng rng(23, 9);
  double p = 0.0, pre = 0.0, pim = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const ChannelMatrix h = sample_rayleigh(d, tau0, rng);
    p += std::norm(h.entries(0, 0));
    pre += h.entries(0, 0).real() * h.entries(0, 0).real();
    pim += h.entries(0, 0).imag() * h.entries(0, 0).imag();
  }
  CHECK(p / n == doctest::Approx(var).epsilon(0.02));
  CHECK(pre / n == doctest::Approx(var / 2).epsilon(0.03));
  CHECK(pim / n == doctest::Approx(var / 2).epsilon(0.03));
}

TEST_CASE("rayleigh: amplitude scales inversely with distance") {
  Eigen::MatrixXd d1(1, 1), d2(1, 1);
  d1(0, 0) = 150.0;
  d2(0, 0) = 300.0;
  // Same substream: doubling the distance exactly halves each draw.
  PhiloxRng ra(31, 2), rb(31, 2);
  const ChannelMatrix a = sample_rayleigh(d1, 1e-4, ra);
  const ChannelMatrix b = sample_rayleigh(d2, 1e-4, rb);
  CHECK(std::norm(b.entries(0, 0)) ==
        doctest::Approx(std::norm(a.entries(0, 0)) / 4.0).epsilon(1e-12));
}

TEST_CASE("isotropic: equal distances match per-link fading exactly") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(5, 2, 250.0);
  PhiloxRng ra(37, 3), rb(37, 3);
  const ChannelMatrix iso = sample_isotropic(d, 1e-4, ra);
  const ChannelMatrix ray = sample_rayleigh(d, 1e-4, rb);
  CHECK(iso.entries == ray.entries);
}

TEST_CASE("isotropic: column power conservation") {
  const Eigen::MatrixXd d = random_distances(6, 2, 5);
  const double tau0 = 1e-4;
  PhiloxRng rng(41, 6);
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(2);
  Eigen::ArrayXd acc_per_entry = Eigen::ArrayXd::Zero(6);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const ChannelMatrix h = sample_isotropic(d, tau0, rng);
    for (int k = 0; k < 2; ++k) acc(k) += h.entries.col(k).squaredNorm();
    for (int m = 0; m < 6; ++m) acc_per_entry(m) += std::norm(h.entries(m, 0));
  }
  for (int k = 0; k < 2; ++k) {
    const double expected =
        tau0 * d.col(k).array().square().inverse().sum();
    CHECK(acc(k) / n == doctest::Approx(expected).epsilon(0.02));
  }
  // Per-entry variance is flat across UAVs for a fixed user.
  const double mean_entry = acc_per_entry.sum() / (6.0 * n);
  for (int m = 0; m < 6; ++m) {
    CHECK(acc_per_entry(m) / n == doctest::Approx(mean_entry).epsilon(0.05));
  }
}

TEST_CASE("per-link and isotropic column powers agree within 3 SE") {
  const Eigen::MatrixXd d = random_distances(6, 3, 11);
  const double tau0 = 1e-4;
  const int n = 20000;
  Eigen::ArrayXd pow_ray = Eigen::ArrayXd::Zero(3),
                 pow_iso = Eigen::ArrayXd::Zero(3);
  Eigen::ArrayXd sq_ray = Eigen::ArrayXd::Zero(3),
                 sq_iso = Eigen::ArrayXd::Zero(3);
  PhiloxRng ra(43, 7), rb(47, 8);
  for (int i = 0; i < n; ++i) {
    const ChannelMatrix hr = sample_rayleigh(d, tau0, ra);
    const ChannelMatrix hi = sample_isotropic(d, tau0, rb);
    for (int k = 0; k < 3; ++k) {
      const double vr = hr.entries.col(k).squaredNorm();
      const double vi = hi.entries.col(k).squaredNorm();
      pow_ray(k) += vr;
      pow_iso(k) += vi;
      sq_ray(k) += vr * vr;
      sq_iso(k) += vi * vi;
    }
  }
  for (int k = 0; k < 3; ++k) {
    const double mr = pow_ray(k) / n, mi = pow_iso(k) / n;
    const double se_r = std::sqrt((sq_ray(k) / n - mr * mr) / n);
    const double se_i = std::sqrt((sq_iso(k) / n - mi * mi) / n);
    CHECK(std::abs(mr - mi) <= 3.0 * std::sqrt(se_r * se_r + se_i * se_i));
  }
}

TEST_CASE("sampled matrices have full column rank") {
  const Eigen::MatrixXd d = random_distances(10, 6, 21);
  PhiloxRng rng(53, 12);
  for (int i = 0; i < 10000; ++i) {
    const ChannelModel model = static_cast<ChannelModel>(i % 3);
    const ChannelMatrix h = sample_channel(d, 1e-4, model, rng);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h.entries);
    const auto& sv = svd.singularValues();
    CHECK(sv(sv.size() - 1) > 1e-12 * sv(0));
  }
}

TEST_CASE("samplers reject non-positive distances") {
  Eigen::MatrixXd d(1, 1);
  d(0, 0) = 0.0;
  PhiloxRng rng(1, 1);
  CHECK_THROWS_AS(sample_rayleigh(d, 1e-4, rng), NumericalError);
  CHECK_THROWS_AS(sample_isotropic(d, 1e-4, rng), NumericalError);
  CHECK_THROWS_AS(sample_los_random_phase(d, 1e-4, rng), NumericalError);
}
