#pragma once

#include <string>
#include <vector>

#include "skycomp/scenario.hpp"

namespace skycomp {

// Shared experiment settings; the CLI maps its flags onto this struct.
struct ExperimentContext {
  ScenarioConfig config;
  std::string out_dir;
  int trials = 0;            // 0 selects the per-experiment default
  std::string mode = "all";  // full | current | static | all
  bool dump_subproblems = false;
  int stride = 1;            // snapshot episode stride
  std::vector<double> speeds = {0.0, 5.0, 10.0, 15.0, 20.0};
  std::vector<int> group_counts = {2, 3, 6, 9};
};

// Each experiment writes <out_dir>/<name>.csv atomically and returns the
// CSV text.  All are deterministic in (config, trials).

// Per-user closed-form bounds vs Monte-Carlo ergodic rates on one random
// drop.  Columns: user_id, lower, upper, mc_los, mc_rayleigh, se.
std::string run_bounds_tightness(const ExperimentContext& ctx);

// Optimizer trace from a random placement, with the true objective
// re-evaluated per iteration.  Columns: iteration, R_bound, R_mc, se.
std::string run_convergence(const ExperimentContext& ctx);

// Min rate vs UAV speed limit for the planner modes, warm-started in
// ascending speed order.  Columns: mode, v_uav, min_rate_bound,
// min_rate_mc, se.
std::string run_speed_sweep(const ExperimentContext& ctx);

// Min rate vs number of user groups.  Columns: L, K, mode, min_rate,
// status.
std::string run_grouping_sweep(const ExperimentContext& ctx);

// Random-matrix statistics behind the rate bounds.  Columns: statistic,
// theoretical, empirical, rel_error, trials.
std::string run_random_matrix_stats(const ExperimentContext& ctx);

// User and UAV positions at strided episodes for the planner modes.
// Columns: mode, episode, kind, index, x, y.
std::string run_trajectory_snapshot(const ExperimentContext& ctx);

}  // namespace skycomp
