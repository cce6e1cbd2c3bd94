// Compares the serial reference Monte-Carlo kernel against the OpenMP one
// and checks they agree bit for bit (both derive per-trial substreams and
// reduce in trial order).

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "skycomp/rates.hpp"

using namespace skycomp;

namespace {

ScenarioConfig bench_config() {
  ScenarioConfig cfg;
  cfg.num_uavs = 10;
  cfg.users_per_group = 6;
  cfg.num_groups = 1;
  cfg.num_episodes = 1;
  cfg.episode_duration_s = 0.2;
  cfg.altitude_m = 100.0;
  cfg.tx_power_dbm = 23.0;
  cfg.noise_psd_dbm_hz = -169.0;
  cfg.bandwidth_hz = 1e7;
  cfg.ref_gain_db = -40.0;
  cfg.uav_speed_max_mps = 0.0;
  cfg.user_speed_mps = 0.0;
  cfg.arena = {0.0, 100.0, 0.0, 100.0};
  cfg.seed = 2024;
  cfg.finalize();
  return cfg;
}

double time_run(const Eigen::MatrixXd& dist, const ScenarioConfig& cfg,
                int trials, Exec exec, McEstimate& out) {
  const auto t0 = std::chrono::steady_clock::now();
  out = mc_ergodic_rates(dist, cfg, ChannelModel::LosRandomPhase, trials,
                         cfg.seed, 0, 0, StreamPurpose::McGeneric, exec);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  int trials = 200000;
  if (argc > 1) trials = std::atoi(argv[1]);

  const ScenarioConfig cfg = bench_config();
  Eigen::MatrixXd dist(cfg.num_uavs, cfg.users_per_group);
  PhiloxRng rng(cfg.seed, make_stream(StreamPurpose::McGeneric, 9, 0, 0));
  for (int k = 0; k < cfg.users_per_group; ++k) {
    for (int m = 0; m < cfg.num_uavs; ++m) {
      dist(m, k) = rng.uniform(100.0, 200.0);
    }
  }

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif
  std::printf("trials:  %d  (M=%d, K=%d)\n", trials, cfg.num_uavs,
              cfg.users_per_group);

  McEstimate serial, parallel;
  const double t_serial = time_run(dist, cfg, trials, Exec::Serial, serial);
  const double t_omp = time_run(dist, cfg, trials, Exec::OpenMP, parallel);

  bool identical = true;
  for (int k = 0; k < cfg.users_per_group; ++k) {
    identical = identical && serial.mean(k) == parallel.mean(k) &&
                serial.std_error(k) == parallel.std_error(k);
  }

  std::printf("serial reference: %8.3f s\n", t_serial);
  std::printf("openmp kernel:    %8.3f s\n", t_omp);
  std::printf("speedup:          %8.2fx\n", t_serial / t_omp);
  std::printf("bitwise equal:    %s\n", identical ? "yes" : "NO");
  std::printf("rate[0]:          %.12f bps/Hz (se %.2e)\n", serial.mean(0),
              serial.std_error(0));
  return identical ? 0 : 1;
}
