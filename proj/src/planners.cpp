#include "skycomp/planners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skycomp/errors.hpp"
#include "skycomp/rng.hpp"

namespace skycomp {

namespace {

constexpr double kJitterHalfWidth = 10.0;  // m around the user centroid
constexpr double kCoincidenceNudge = 1e-3; // m, ground-level RAU guard

double horizon_bound_min_rate(const EpisodeTracks& users,
                              const UavTracks& uavs,
                              const ScenarioConfig& config) {
  EpisodeTracks full;
  full.users = users.users;
  full.uavs = uavs;
  return average_min_rate(full, config, BoundKind::Lower).min_lower;
}

// Keeps ground-level deployments off exact user locations so distances and
// path gains stay positive.
void nudge_coincident(UavTracks& uavs, const UserTracks& users,
                      const ScenarioConfig& config) {
  if (config.altitude_m > 0.0) return;
  for (int n = 0; n < uavs.N; ++n) {
    for (int m = 0; m < uavs.M; ++m) {
      for (int l = 0; l < users.L; ++l) {
        for (int k = 0; k < users.K; ++k) {
          const double dx = uavs.px(m, n) - users.ax(k, l, n);
          const double dy = uavs.py(m, n) - users.by(k, l, n);
          if (std::hypot(dx, dy) < kCoincidenceNudge) {
            uavs.x[uavs.idx(m, n)] += kCoincidenceNudge;
          }
        }
      }
    }
  }
}

}  // namespace

UavTracks default_initial_placement(const EpisodeTracks& tracks,
                                    const ScenarioConfig& config) {
  double cx = 0.0, cy = 0.0;
  const auto& u = tracks.users;
  const size_t count = u.a.size();
  for (size_t i = 0; i < count; ++i) {
    cx += u.a[i];
    cy += u.b[i];
  }
  cx /= static_cast<double>(count);
  cy /= static_cast<double>(count);

  const int M = config.num_uavs;
  std::vector<double> xs(M), ys(M);
  for (int m = 0; m < M; ++m) {
    PhiloxRng rng(config.seed, make_stream(StreamPurpose::UavPlacement, 0, 0,
                                           static_cast<std::uint64_t>(m)));
    xs[m] = cx + rng.uniform(-kJitterHalfWidth, kJitterHalfWidth);
    ys[m] = cy + rng.uniform(-kJitterHalfWidth, kJitterHalfWidth);
  }
  return UavTracks::constant(M, config.num_episodes, xs, ys);
}

UavTracks random_initial_placement(const ScenarioConfig& config) {
  const int M = config.num_uavs;
  const int N = config.num_episodes;
  const double budget = config.displacement_budget_m;
  UavTracks t;
  t.M = M;
  t.N = N;
  t.x.resize(static_cast<size_t>(M) * N);
  t.y.resize(t.x.size());
  for (int m = 0; m < M; ++m) {
    PhiloxRng rng(config.seed, make_stream(StreamPurpose::UavPlacement, 1, 0,
                                           static_cast<std::uint64_t>(m)));
    double x = rng.uniform(config.arena.xmin, config.arena.xmax);
    double y = rng.uniform(config.arena.ymin, config.arena.ymax);
    t.x[t.idx(m, 0)] = x;
    t.y[t.idx(m, 0)] = y;
    for (int n = 1; n < N; ++n) {
      const double theta = rng.angle();
      const double step = budget * rng.uniform();
      x += step * std::cos(theta);
      y += step * std::sin(theta);
      t.x[t.idx(m, n)] = x;
      t.y[t.idx(m, n)] = y;
    }
  }
  return t;
}

PlanResult plan_full_information(const EpisodeTracks& tracks,
                                 const ScenarioConfig& config,
                                 const PlanOptions& options) {
  UavTracks init = options.init != nullptr
                       ? *options.init
                       : default_initial_placement(tracks, config);

  ScaOptions sca = options.sca;
  ScaResult res = run_sca(tracks, config, SolveMode::Joint, init, sca);

  PlanResult plan;
  plan.mode = SolveMode::Joint;
  plan.uav_tracks = res.final_iterate().tracks;
  nudge_coincident(plan.uav_tracks, tracks.users, config);
  plan.bound_min_rate = horizon_bound_min_rate(tracks, plan.uav_tracks, config);
  for (const ScaIterate& it : res.trace) {
    plan.trace_bound.push_back(it.rate);
    plan.trace_tracks.push_back(it.tracks);
  }
  int newton = 0;
  for (const ScaIterate& it : res.trace) {
    if (it.has_solution) newton += it.solution.newton_iterations;
  }
  plan.episodes.push_back(
      {0, res.iterations(), newton, res.final_iterate().rate});
  if (res.final_iterate().has_solution) {
    plan.final_specs.push_back(res.final_iterate().spec);
    plan.final_solutions.push_back(res.final_iterate().solution);
  }
  return plan;
}

PlanResult plan_static(const EpisodeTracks& tracks,
                       const ScenarioConfig& config,
                       const PlanOptions& options) {
  UavTracks init = options.init != nullptr
                       ? *options.init
                       : default_initial_placement(tracks, config);

  ScaResult res = run_sca(tracks, config, SolveMode::Static, init, options.sca);

  PlanResult plan;
  plan.mode = SolveMode::Static;
  plan.uav_tracks = res.final_iterate().tracks;
  nudge_coincident(plan.uav_tracks, tracks.users, config);
  plan.bound_min_rate = horizon_bound_min_rate(tracks, plan.uav_tracks, config);
  for (const ScaIterate& it : res.trace) {
    plan.trace_bound.push_back(it.rate);
    plan.trace_tracks.push_back(it.tracks);
  }
  int newton = 0;
  for (const ScaIterate& it : res.trace) {
    if (it.has_solution) newton += it.solution.newton_iterations;
  }
  plan.episodes.push_back(
      {0, res.iterations(), newton, res.final_iterate().rate});
  if (res.final_iterate().has_solution) {
    plan.final_specs.push_back(res.final_iterate().spec);
    plan.final_solutions.push_back(res.final_iterate().solution);
  }
  return plan;
}

PlanResult plan_current_information(const EpisodeTracks& tracks,
                                    const ScenarioConfig& config,
                                    const PlanOptions& options) {
  const int M = config.num_uavs;
  const int N = config.num_episodes;
  const double budget = config.displacement_budget_m;

  PlanResult plan;
  plan.mode = SolveMode::SingleEpisode;
  plan.uav_tracks.M = M;
  plan.uav_tracks.N = N;
  plan.uav_tracks.x.resize(static_cast<size_t>(M) * N);
  plan.uav_tracks.y.resize(plan.uav_tracks.x.size());

  UavTracks prev;  // N = 1 slice of the trajectory so far
  for (int n = 0; n < N; ++n) {
    std::vector<UavTracks> candidates;
    if (n == 0) {
      // Unanchored first episode, started from the horizon centroid.
      UavTracks init = options.init != nullptr
                           ? *options.init
                           : default_initial_placement(tracks, config);
      UavTracks init1;
      init1.M = M;
      init1.N = 1;
      init1.x.assign(init.x.begin(), init.x.begin() + M);
      init1.y.assign(init.y.begin(), init.y.begin() + M);
      candidates.push_back(init1);
    } else {
      candidates.push_back(prev);  // zero movement is always feasible
      if (options.reference != nullptr) {
        // Pull toward the reference trajectory, projected into the
        // reachable disc around the previous position.
        UavTracks cand = prev;
        bool distinct = false;
        for (int m = 0; m < M; ++m) {
          const double rx = options.reference->uav_tracks.px(m, n);
          const double ry = options.reference->uav_tracks.py(m, n);
          double dx = rx - prev.px(m, 0);
          double dy = ry - prev.py(m, 0);
          const double dist = std::hypot(dx, dy);
          const double reach = 0.999 * budget;
          if (dist > reach && dist > 0.0) {
            dx *= reach / dist;
            dy *= reach / dist;
          }
          if (std::abs(dx) + std::abs(dy) > 1e-12) distinct = true;
          cand.x[m] = prev.px(m, 0) + dx;
          cand.y[m] = prev.py(m, 0) + dy;
        }
        if (distinct) candidates.push_back(cand);
      }
    }

    ScaOptions sca = options.sca;
    sca.episode = n;
    sca.anchor = (n == 0) ? nullptr : &prev;

    double best_rate = -std::numeric_limits<double>::infinity();
    ScaResult best;
    for (const UavTracks& cand : candidates) {
      ScaResult res = run_sca(tracks, config, SolveMode::SingleEpisode, cand,
                              sca);
      if (res.final_iterate().rate > best_rate) {
        best_rate = res.final_iterate().rate;
        best = std::move(res);
      }
    }

    const ScaIterate& fin = best.final_iterate();
    for (int m = 0; m < M; ++m) {
      plan.uav_tracks.x[plan.uav_tracks.idx(m, n)] = fin.tracks.px(m, 0);
      plan.uav_tracks.y[plan.uav_tracks.idx(m, n)] = fin.tracks.py(m, 0);
    }
    int newton = 0;
    for (const ScaIterate& it : best.trace) {
      if (it.has_solution) newton += it.solution.newton_iterations;
    }
    plan.episodes.push_back({n, best.iterations(), newton, fin.rate});
    if (fin.has_solution) {
      plan.final_specs.push_back(fin.spec);
      plan.final_solutions.push_back(fin.solution);
    }

    prev.M = M;
    prev.N = 1;
    prev.x.assign(&plan.uav_tracks.x[plan.uav_tracks.idx(0, n)],
                  &plan.uav_tracks.x[plan.uav_tracks.idx(0, n)] + M);
    prev.y.assign(&plan.uav_tracks.y[plan.uav_tracks.idx(0, n)],
                  &plan.uav_tracks.y[plan.uav_tracks.idx(0, n)] + M);
  }

  nudge_coincident(plan.uav_tracks, tracks.users, config);
  plan.bound_min_rate = horizon_bound_min_rate(tracks, plan.uav_tracks, config);
  return plan;
}

void evaluate_plan(PlanResult& plan, const EpisodeTracks& tracks,
                   const ScenarioConfig& config, int trials,
                   bool evaluate_trace, Exec exec) {
  EpisodeTracks full;
  full.users = tracks.users;
  full.uavs = plan.uav_tracks;
  const RateReport rep = average_min_rate(
      full, config, BoundKind::MonteCarlo, trials, StreamPurpose::McPlanEval,
      exec);
  plan.mc_min_rate = rep.min_mc;
  plan.mc_min_rate_se = rep.min_mc_se;
  plan.mc_evaluated = true;

  if (evaluate_trace) {
    plan.trace_mc.clear();
    plan.trace_mc_se.clear();
    for (const UavTracks& t : plan.trace_tracks) {
      EpisodeTracks iter_tracks;
      iter_tracks.users = tracks.users;
      iter_tracks.uavs = t;
      // Static traces carry one position row per UAV; expand if needed.
      if (iter_tracks.uavs.N != config.num_episodes) {
        std::vector<double> xs(t.x.begin(), t.x.begin() + t.M);
        std::vector<double> ys(t.y.begin(), t.y.begin() + t.M);
        iter_tracks.uavs =
            UavTracks::constant(t.M, config.num_episodes, xs, ys);
      }
      const RateReport r =
          average_min_rate(iter_tracks, config, BoundKind::MonteCarlo, trials,
                           StreamPurpose::McPlanEval, exec);
      plan.trace_mc.push_back(r.min_mc);
      plan.trace_mc_se.push_back(r.min_mc_se);
    }
  }
}

}  // namespace skycomp
