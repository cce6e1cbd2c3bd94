#include "skycomp/channel.hpp"

#include <cmath>
#include <complex>

#include "skycomp/errors.hpp"

namespace skycomp {

namespace {

void require_positive(const Eigen::MatrixXd& distances) {
  if ((distances.array() <= 0.0).any()) {
    throw NumericalError("channel sampling requires distances > 0");
  }
}

}  // namespace

double path_gain(double distance, double tau0) {
  if (distance <= 0.0) throw NumericalError("path_gain requires d > 0");
  return tau0 / (distance * distance);
}

ChannelMatrix sample_los_random_phase(const Eigen::MatrixXd& distances,
                                      double tau0, PhiloxRng& rng) {
  require_positive(distances);
  const double amp0 = std::sqrt(tau0);
  ChannelMatrix h;
  h.model = ChannelModel::LosRandomPhase;
  h.entries.resize(distances.rows(), distances.cols());
  for (Eigen::Index k = 0; k < distances.cols(); ++k) {
    for (Eigen::Index m = 0; m < distances.rows(); ++m) {
      const double theta = rng.angle();
      const double amp = amp0 / distances(m, k);
      h.entries(m, k) = {amp * std::cos(theta), amp * std::sin(theta)};
    }
  }
  return h;
}

ChannelMatrix sample_rayleigh(const Eigen::MatrixXd& distances, double tau0,
                              PhiloxRng& rng) {
  require_positive(distances);
  ChannelMatrix h;
  h.model = ChannelModel::RayleighPerLink;
  h.entries.resize(distances.rows(), distances.cols());
  for (Eigen::Index k = 0; k < distances.cols(); ++k) {
    for (Eigen::Index m = 0; m < distances.rows(); ++m) {
      h.entries(m, k) = rng.cgaussian(path_gain(distances(m, k), tau0));
    }
  }
  return h;
}

ChannelMatrix sample_isotropic(const Eigen::MatrixXd& distances, double tau0,
                               PhiloxRng& rng) {
  require_positive(distances);
  const auto M = distances.rows();
  ChannelMatrix h;
  h.model = ChannelModel::RayleighIsotropic;
  h.entries.resize(M, distances.cols());
  for (Eigen::Index k = 0; k < distances.cols(); ++k) {
    // Column-average power: identical total E||h_k||^2 as per-link fading.
    const double var =
        tau0 * distances.col(k).array().square().inverse().sum() /
        static_cast<double>(M);
    for (Eigen::Index m = 0; m < M; ++m) {
      h.entries(m, k) = rng.cgaussian(var);
    }
  }
  return h;
}

ChannelMatrix sample_channel(const Eigen::MatrixXd& distances, double tau0,
                             ChannelModel model, PhiloxRng& rng) {
  switch (model) {
    case ChannelModel::LosRandomPhase:
      return sample_los_random_phase(distances, tau0, rng);
    case ChannelModel::RayleighPerLink:
      return sample_rayleigh(distances, tau0, rng);
    case ChannelModel::RayleighIsotropic:
      return sample_isotropic(distances, tau0, rng);
  }
  throw NumericalError("unknown channel model");
}

}  // namespace skycomp
