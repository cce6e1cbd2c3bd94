#include "skycomp/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skycomp/errors.hpp"

namespace skycomp {

namespace {

constexpr double kLog2 = 0.6931471805599453;

double log2_1p(double x) { return std::log1p(x) / kLog2; }

double bound_inner_snr(const Eigen::VectorXd& distances,
                       const ScenarioConfig& config, int dof) {
  const double sum_inv_d2 =
      distances.array().square().inverse().sum();
  const double m = static_cast<double>(config.num_uavs);
  return config.tx_power_w * config.ref_gain * sum_inv_d2 /
         (m * config.noise_power_w / static_cast<double>(dof));
}

}  // namespace

std::optional<ZfSolution> try_zf(const Eigen::MatrixXcd& h, double tx_power_w,
                                 double noise_power_w, double cond_limit) {
  const auto K = h.cols();
  const Eigen::MatrixXcd gram = h.adjoint() * h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
  if (es.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd ev = es.eigenvalues();
  const double lo = ev(0);
  const double hi = ev(K - 1);
  if (!(lo > 0.0) || hi / lo > cond_limit) return std::nullopt;

  const Eigen::MatrixXcd gram_inv = es.eigenvectors() *
                                    ev.cwiseInverse().asDiagonal() *
                                    es.eigenvectors().adjoint();
  ZfSolution out;
  out.beamformers = h * gram_inv;  // columns are the unnormalized w_k
  out.snr_beamformer.resize(K);
  out.snr_gram.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    out.beamformers.col(k).normalize();
    const std::complex<double> dot = out.beamformers.col(k).dot(h.col(k));
    out.snr_beamformer(k) = tx_power_w * std::norm(dot) / noise_power_w;
    out.snr_gram(k) =
        tx_power_w / (gram_inv(k, k).real() * noise_power_w);
    const double rel = std::abs(out.snr_beamformer(k) - out.snr_gram(k)) /
                       std::max(out.snr_gram(k), 1e-300);
    if (!(rel <= 1e-8)) return std::nullopt;
  }
  return out;
}

Eigen::MatrixXcd zf_beamformers(const ChannelMatrix& h) {
  auto sol = try_zf(h.entries, 1.0, 1.0);
  if (!sol) throw SingularChannelError("ZF: channel matrix is singular");
  return sol->beamformers;
}

ZfSnr zf_snr(const ChannelMatrix& h, double tx_power_w,
             double noise_power_w) {
  auto sol = try_zf(h.entries, tx_power_w, noise_power_w);
  if (!sol) throw SingularChannelError("ZF: channel matrix is singular");
  return {sol->snr_beamformer, sol->snr_gram};
}

double rate_upper_bound(const Eigen::VectorXd& distances,
                        const ScenarioConfig& config) {
  const int dof = config.num_uavs - config.users_per_group + 1;
  return log2_1p(bound_inner_snr(distances, config, dof)) /
         static_cast<double>(config.num_groups);
}

double rate_lower_bound(const Eigen::VectorXd& distances,
                        const ScenarioConfig& config) {
  const int dof = config.num_uavs - config.users_per_group;
  if (dof <= 0) {
    throw NumericalError(
        "rate_lower_bound undefined for M = K (M - K pole)");
  }
  return log2_1p(bound_inner_snr(distances, config, dof)) /
         static_cast<double>(config.num_groups);
}

namespace {

// One trial: sample a channel, resample singular draws within the same
// substream, return per-user (1/L) log2(1 + SNR).
void mc_one_trial(const Eigen::MatrixXd& distances,
                  const ScenarioConfig& config, ChannelModel model,
                  std::uint64_t seed, std::uint64_t stream, double* rates_out,
                  long* singular_out) {
  const int K = static_cast<int>(distances.cols());
  PhiloxRng rng(seed, stream);
  long singular = 0;
  for (;;) {
    const ChannelMatrix h =
        sample_channel(distances, config.ref_gain, model, rng);
    auto sol = try_zf(h.entries, config.tx_power_w, config.noise_power_w);
    if (sol) {
      for (int k = 0; k < K; ++k) {
        rates_out[k] = std::log1p(sol->snr_gram(k)) /
                       (kLog2 * static_cast<double>(config.num_groups));
      }
      break;
    }
    if (++singular > 64) {
      throw NumericalError("ZF resampling did not terminate");
    }
  }
  *singular_out = singular;
}

}  // namespace

McEstimate mc_ergodic_rates(const Eigen::MatrixXd& distances,
                            const ScenarioConfig& config, ChannelModel model,
                            int trials, std::uint64_t seed, int episode,
                            int group, StreamPurpose purpose, Exec exec) {
  if (trials < 100) throw ConfigError("mc_ergodic_rates requires >= 100 trials");
  const int K = static_cast<int>(distances.cols());
  std::vector<double> per_trial(static_cast<size_t>(trials) * K);
  std::vector<long> singular(trials, 0);

  if (exec == Exec::OpenMP) {
#pragma omp parallel for schedule(static)
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t stream = make_stream(
          purpose, static_cast<std::uint64_t>(episode),
          static_cast<std::uint64_t>(group), static_cast<std::uint64_t>(t));
      mc_one_trial(distances, config, model, seed, stream,
                   &per_trial[static_cast<size_t>(t) * K], &singular[t]);
    }
  } else {
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t stream = make_stream(
          purpose, static_cast<std::uint64_t>(episode),
          static_cast<std::uint64_t>(group), static_cast<std::uint64_t>(t));
      mc_one_trial(distances, config, model, seed, stream,
                   &per_trial[static_cast<size_t>(t) * K], &singular[t]);
    }
  }

  McEstimate est;
  est.trials = trials;
  est.mean = Eigen::ArrayXd::Zero(K);
  est.std_error = Eigen::ArrayXd::Zero(K);
  for (int t = 0; t < trials; ++t) {
    est.singular_draws += singular[t];
    for (int k = 0; k < K; ++k) {
      est.mean(k) += per_trial[static_cast<size_t>(t) * K + k];
    }
  }
  est.mean /= static_cast<double>(trials);
  for (int t = 0; t < trials; ++t) {
    for (int k = 0; k < K; ++k) {
      const double d = per_trial[static_cast<size_t>(t) * K + k] - est.mean(k);
      est.std_error(k) += d * d;
    }
  }
  est.std_error =
      (est.std_error /
       (static_cast<double>(trials) * (static_cast<double>(trials) - 1.0)))
          .sqrt();

  if (est.singular_draws * 1000 >= trials) {
    throw NumericalError("excessive singular channel draws (>= 0.1%)");
  }
  return est;
}

double RateReport::min_of(BoundKind kind) const {
  switch (kind) {
    case BoundKind::Lower: return min_lower;
    case BoundKind::Upper: return min_upper;
    case BoundKind::MonteCarlo: return min_mc;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

RateReport average_min_rate(const EpisodeTracks& tracks,
                            const ScenarioConfig& config, BoundKind kind,
                            int trials, StreamPurpose purpose, Exec exec) {
  const int K = config.users_per_group;
  const int L = config.num_groups;
  const int N = config.num_episodes;
  if (tracks.users.empty() || tracks.uavs.empty()) {
    throw ConfigError("average_min_rate requires complete tracks");
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  RateReport rep;
  rep.K = K;
  rep.L = L;
  rep.N = N;
  const size_t total = static_cast<size_t>(K) * L * N;
  rep.lower_bound.resize(total);
  rep.upper_bound.resize(total);
  rep.mc_estimate.assign(total, nan);
  rep.mc_std_error.assign(total, nan);

  for (int n = 0; n < N; ++n) {
    for (int l = 0; l < L; ++l) {
      for (int k = 0; k < K; ++k) {
        const Eigen::VectorXd d = user_distances(tracks, config, k, l, n);
        rep.lower_bound[rep.idx(k, l, n)] = rate_lower_bound(d, config);
        rep.upper_bound[rep.idx(k, l, n)] = rate_upper_bound(d, config);
      }
      if (kind == BoundKind::MonteCarlo) {
        const Eigen::MatrixXd d = group_distance_matrix(tracks, config, l, n);
        const McEstimate est =
            mc_ergodic_rates(d, config, ChannelModel::LosRandomPhase, trials,
                             config.seed, n, l, purpose, exec);
        for (int k = 0; k < K; ++k) {
          rep.mc_estimate[rep.idx(k, l, n)] = est.mean(k);
          rep.mc_std_error[rep.idx(k, l, n)] = est.std_error(k);
        }
      }
    }
  }

  const int users = K * L;
  rep.avg_lower.assign(users, 0.0);
  rep.avg_upper.assign(users, 0.0);
  rep.avg_mc.assign(users, kind == BoundKind::MonteCarlo ? 0.0 : nan);
  rep.avg_mc_se.assign(users, kind == BoundKind::MonteCarlo ? 0.0 : nan);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const int u = l * K + k;
      for (int n = 0; n < N; ++n) {
        rep.avg_lower[u] += rep.lower_bound[rep.idx(k, l, n)];
        rep.avg_upper[u] += rep.upper_bound[rep.idx(k, l, n)];
        if (kind == BoundKind::MonteCarlo) {
          rep.avg_mc[u] += rep.mc_estimate[rep.idx(k, l, n)];
          const double se = rep.mc_std_error[rep.idx(k, l, n)];
          rep.avg_mc_se[u] += se * se;
        }
      }
      rep.avg_lower[u] /= N;
      rep.avg_upper[u] /= N;
      if (kind == BoundKind::MonteCarlo) {
        rep.avg_mc[u] /= N;
        rep.avg_mc_se[u] = std::sqrt(rep.avg_mc_se[u]) / N;
      }
    }
  }

  rep.min_lower = *std::min_element(rep.avg_lower.begin(), rep.avg_lower.end());
  rep.min_upper = *std::min_element(rep.avg_upper.begin(), rep.avg_upper.end());
  if (kind == BoundKind::MonteCarlo) {
    const auto it = std::min_element(rep.avg_mc.begin(), rep.avg_mc.end());
    rep.min_mc = *it;
    rep.min_mc_se = rep.avg_mc_se[std::distance(rep.avg_mc.begin(), it)];
  } else {
    rep.min_mc = nan;
    rep.min_mc_se = nan;
  }
  return rep;
}

}  // namespace skycomp
