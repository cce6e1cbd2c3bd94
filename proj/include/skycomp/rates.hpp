#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "skycomp/channel.hpp"
#include "skycomp/scenario.hpp"

namespace skycomp {

// Execution policy for the Monte-Carlo kernels.  Both paths derive one RNG
// substream per trial and reduce in trial order, so they produce bit-equal
// results; the serial path is kept as the reference implementation.
enum class Exec { Serial, OpenMP };

struct ZfSolution {
  Eigen::MatrixXcd beamformers;    // M x K, unit-norm columns
  Eigen::ArrayXd snr_beamformer;   // P |w_k^H h_k|^2 / sigma^2
  Eigen::ArrayXd snr_gram;         // P / ([(H^H H)^-1]_kk sigma^2)
};

// Computes ZF receive beamformers and per-user SNR by both routes.  Returns
// nullopt when the Gram matrix condition number exceeds cond_limit or the
// two SNR routes disagree beyond 1e-8 relative (callers resample).
std::optional<ZfSolution> try_zf(const Eigen::MatrixXcd& h, double tx_power_w,
                                 double noise_power_w,
                                 double cond_limit = 1e12);

// Throwing wrappers for the single-shot API.
Eigen::MatrixXcd zf_beamformers(const ChannelMatrix& h);
struct ZfSnr {
  Eigen::ArrayXd via_beamformer;
  Eigen::ArrayXd via_gram;
};
ZfSnr zf_snr(const ChannelMatrix& h, double tx_power_w, double noise_power_w);

// Closed-form per-episode ergodic-rate bounds for one user, from its own
// distances to the M UAVs only.  Both include the 1/L scheduling prefactor
// so bounds, Monte-Carlo estimates, and optimizer objectives compare
// directly.
double rate_upper_bound(const Eigen::VectorXd& distances,
                        const ScenarioConfig& config);
double rate_lower_bound(const Eigen::VectorXd& distances,
                        const ScenarioConfig& config);

struct McEstimate {
  Eigen::ArrayXd mean;       // bps/Hz per user
  Eigen::ArrayXd std_error;  // standard error of the mean
  long singular_draws = 0;   // resampled draws over all trials
  int trials = 0;
};

// Monte-Carlo per-episode ergodic rate (1/L) E[log2(1 + SNR_k)] for one
// (group, episode) geometry.  Trials use substream (purpose, episode, group,
// trial); singular draws are resampled within the trial substream and must
// stay below 0.1% of trials.
McEstimate mc_ergodic_rates(const Eigen::MatrixXd& distances,
                            const ScenarioConfig& config, ChannelModel model,
                            int trials, std::uint64_t seed, int episode,
                            int group,
                            StreamPurpose purpose = StreamPurpose::McGeneric,
                            Exec exec = Exec::OpenMP);

enum class BoundKind { Lower, Upper, MonteCarlo };

// Per-user rate summary over all episodes.  Bounds are always filled;
// Monte-Carlo entries are NaN unless requested.
struct RateReport {
  int K = 0, L = 0, N = 0;
  // Per (k, l, n), indexed as UserTracks: (n*L + l)*K + k.
  std::vector<double> lower_bound;
  std::vector<double> upper_bound;
  std::vector<double> mc_estimate;
  std::vector<double> mc_std_error;
  // Per (k, l): episode averages, indexed l*K + k.
  std::vector<double> avg_lower;
  std::vector<double> avg_upper;
  std::vector<double> avg_mc;
  std::vector<double> avg_mc_se;
  double min_lower = 0.0;
  double min_upper = 0.0;
  double min_mc = 0.0;
  double min_mc_se = 0.0;

  int idx(int k, int l, int n) const { return (n * L + l) * K + k; }
  double min_of(BoundKind kind) const;
};

// Fills a RateReport from complete tracks; Monte-Carlo entries are computed
// only for kind == MonteCarlo (with the given trial count).
RateReport average_min_rate(const EpisodeTracks& tracks,
                            const ScenarioConfig& config, BoundKind kind,
                            int trials = 0,
                            StreamPurpose purpose = StreamPurpose::McGeneric,
                            Exec exec = Exec::OpenMP);

}  // namespace skycomp
