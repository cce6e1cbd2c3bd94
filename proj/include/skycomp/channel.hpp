#pragma once

#include <Eigen/Dense>

#include "skycomp/rng.hpp"

namespace skycomp {

enum class ChannelModel {
  LosRandomPhase,    // deterministic amplitude sqrt(tau0)/d, uniform phase
  RayleighPerLink,   // CSCG per entry, variance tau0/d^2
  RayleighIsotropic, // CSCG per column, per-entry variance tau0*sum(d^-2)/M
};

// One M x K complex channel realization for a group within a coherence
// interval.  Rows are UAVs, columns are users.
struct ChannelMatrix {
  Eigen::MatrixXcd entries;
  ChannelModel model = ChannelModel::LosRandomPhase;
};

// Free-space power gain tau0 / d^2 at distance d > 0.
double path_gain(double distance, double tau0);

ChannelMatrix sample_los_random_phase(const Eigen::MatrixXd& distances,
                                      double tau0, PhiloxRng& rng);
ChannelMatrix sample_rayleigh(const Eigen::MatrixXd& distances, double tau0,
                              PhiloxRng& rng);
ChannelMatrix sample_isotropic(const Eigen::MatrixXd& distances, double tau0,
                               PhiloxRng& rng);

ChannelMatrix sample_channel(const Eigen::MatrixXd& distances, double tau0,
                             ChannelModel model, PhiloxRng& rng);

}  // namespace skycomp
