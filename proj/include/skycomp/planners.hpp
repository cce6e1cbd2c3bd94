#pragma once

#include <vector>

#include "skycomp/rates.hpp"
#include "skycomp/sca.hpp"
#include "skycomp/scenario.hpp"

namespace skycomp {

struct EpisodeSolveMeta {
  int episode = 0;
  int sca_iterations = 0;
  int newton_iterations = 0;
  double rate = 0.0;  // per-episode bound objective
};

struct PlanResult {
  SolveMode mode = SolveMode::Joint;
  UavTracks uav_tracks;
  double bound_min_rate = 0.0;  // optimizer (bound-based) objective
  double mc_min_rate = 0.0;     // true objective via Monte Carlo
  double mc_min_rate_se = 0.0;
  bool mc_evaluated = false;

  // Optimizer convergence trace (joint / static modes): entry 0 is the
  // initial placement.
  std::vector<double> trace_bound;
  std::vector<UavTracks> trace_tracks;
  std::vector<double> trace_mc, trace_mc_se;

  std::vector<EpisodeSolveMeta> episodes;

  // Final subproblem(s) with recovered duals: one for joint / static, one
  // per episode for receding-horizon planning.
  std::vector<SubproblemSpec> final_specs;
  std::vector<SubproblemSolution> final_solutions;
};

struct PlanOptions {
  const UavTracks* init = nullptr;        // warm start placement
  const PlanResult* reference = nullptr;  // candidate source, receding mode
  ScaOptions sca;
};

// Users' centroid over the whole horizon plus +-10 m uniform jitter per UAV,
// constant over episodes (feasible for any displacement budget).
UavTracks default_initial_placement(const EpisodeTracks& tracks,
                                    const ScenarioConfig& config);

// Uniform random drop plus a random walk within the per-episode budget.
UavTracks random_initial_placement(const ScenarioConfig& config);

// Joint optimization over all episodes (full user-movement information).
PlanResult plan_full_information(const EpisodeTracks& tracks,
                                 const ScenarioConfig& config,
                                 const PlanOptions& options = {});

// Episode-by-episode receding-horizon planning anchored at the previous
// episode's position; episode 1 is unanchored.
PlanResult plan_current_information(const EpisodeTracks& tracks,
                                    const ScenarioConfig& config,
                                    const PlanOptions& options = {});

// One fixed position per UAV over the whole horizon.
PlanResult plan_static(const EpisodeTracks& tracks,
                       const ScenarioConfig& config,
                       const PlanOptions& options = {});

// Monte-Carlo evaluation of the true max-min average-rate objective at the
// planned trajectory; optionally evaluates every trace iterate as well.
void evaluate_plan(PlanResult& plan, const EpisodeTracks& tracks,
                   const ScenarioConfig& config, int trials,
                   bool evaluate_trace = false, Exec exec = Exec::OpenMP);

}  // namespace skycomp
