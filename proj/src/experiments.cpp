#include "skycomp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "skycomp/channel.hpp"
#include "skycomp/csv.hpp"
#include "skycomp/planners.hpp"
#include "skycomp/rates.hpp"
#include "skycomp/rng.hpp"

namespace skycomp {

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out << content;
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path + " (" + ec.message() + ")");
}

namespace {

void provenance(CsvBuilder& csv, const ExperimentContext& ctx,
                const std::string& name, int trials) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "config_hash=0x%016llx seed=%llu trials=%d",
                static_cast<unsigned long long>(
                    fnv1a64(ctx.config.canonical_string())),
                static_cast<unsigned long long>(ctx.config.seed), trials);
  csv.comment("skycomp " + name);
  csv.comment(buf);
}

std::string finish(const ExperimentContext& ctx, const std::string& name,
                   const CsvBuilder& csv) {
  if (!ctx.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(ctx.out_dir, ec);
    if (ec) throw IoError("cannot create out dir: " + ctx.out_dir);
    write_file_atomic(ctx.out_dir + "/" + name + ".csv", csv.str());
  }
  return csv.str();
}

// One random drop: users from the mobility model, UAVs uniform in the arena.
EpisodeTracks random_drop(const ScenarioConfig& config) {
  EpisodeTracks tracks;
  tracks.users = generate_user_tracks(config);
  UavTracks walk = random_initial_placement(config);
  std::vector<double> xs(walk.x.begin(), walk.x.begin() + config.num_uavs);
  std::vector<double> ys(walk.y.begin(), walk.y.begin() + config.num_uavs);
  tracks.uavs =
      UavTracks::constant(config.num_uavs, config.num_episodes, xs, ys);
  return tracks;
}

std::vector<std::string> planner_modes(const std::string& mode) {
  if (mode == "all") return {"full", "current", "static"};
  if (mode == "full" || mode == "current" || mode == "static") return {mode};
  throw ConfigError("unknown mode: " + mode);
}

PlanResult run_mode(const std::string& mode, const EpisodeTracks& tracks,
                    const ScenarioConfig& config, const PlanOptions& opts) {
  if (mode == "full") return plan_full_information(tracks, config, opts);
  if (mode == "current") return plan_current_information(tracks, config, opts);
  return plan_static(tracks, config, opts);
}

}  // namespace

std::string run_bounds_tightness(const ExperimentContext& ctx) {
  const ScenarioConfig& cfg = ctx.config;
  const int trials = ctx.trials > 0 ? ctx.trials : 5000;
  const EpisodeTracks tracks = random_drop(cfg);

  CsvBuilder csv;
  provenance(csv, ctx, "bounds", trials);
  csv.header({"user_id", "lower", "upper", "mc_los", "mc_rayleigh", "se"});

  for (int l = 0; l < cfg.num_groups; ++l) {
    const Eigen::MatrixXd dist = group_distance_matrix(tracks, cfg, l, 0);
    // The episode tag doubles as a channel-model label so the two estimates
    // use independent substreams.
    const McEstimate los =
        mc_ergodic_rates(dist, cfg, ChannelModel::LosRandomPhase, trials,
                         cfg.seed, 0, l, StreamPurpose::McBounds);
    const McEstimate ray =
        mc_ergodic_rates(dist, cfg, ChannelModel::RayleighPerLink, trials,
                         cfg.seed, 1, l, StreamPurpose::McBounds);
    for (int k = 0; k < cfg.users_per_group; ++k) {
      const Eigen::VectorXd d = user_distances(tracks, cfg, k, l, 0);
      const double se = std::sqrt(los.std_error(k) * los.std_error(k) +
                                  ray.std_error(k) * ray.std_error(k));
      csv.row({std::to_string(l * cfg.users_per_group + k),
               fmt_g9(rate_lower_bound(d, cfg)), fmt_g9(rate_upper_bound(d, cfg)),
               fmt_g9(los.mean(k)), fmt_g9(ray.mean(k)), fmt_g9(se)});
    }
  }
  return finish(ctx, "bounds", csv);
}

std::string run_convergence(const ExperimentContext& ctx) {
  const ScenarioConfig& cfg = ctx.config;
  const int trials = ctx.trials > 0 ? ctx.trials : 2000;

  EpisodeTracks tracks;
  tracks.users = generate_user_tracks(cfg);
  const UavTracks init = random_initial_placement(cfg);

  PlanOptions opts;
  opts.init = &init;
  if (ctx.dump_subproblems && !ctx.out_dir.empty()) {
    opts.sca.solver.dump = true;
    opts.sca.solver.dump_path = ctx.out_dir + "/subproblem_converge";
  }
  PlanResult plan = plan_full_information(tracks, cfg, opts);
  evaluate_plan(plan, tracks, cfg, trials, /*evaluate_trace=*/true);

  CsvBuilder csv;
  provenance(csv, ctx, "converge", trials);
  csv.header({"iteration", "R_bound", "R_mc", "se"});
  for (size_t q = 0; q < plan.trace_bound.size(); ++q) {
    csv.row({std::to_string(q), fmt_g9(plan.trace_bound[q]),
             fmt_g9(plan.trace_mc[q]), fmt_g9(plan.trace_mc_se[q])});
  }
  return finish(ctx, "converge", csv);
}

std::string run_speed_sweep(const ExperimentContext& ctx) {
  const int trials = ctx.trials > 0 ? ctx.trials : 2000;
  std::vector<double> speeds = ctx.speeds;
  std::sort(speeds.begin(), speeds.end());

  EpisodeTracks tracks;
  tracks.users = generate_user_tracks(ctx.config);

  struct Row {
    std::string mode;
    double v, bound, mc, se;
  };
  std::vector<Row> rows;

  for (const std::string& mode : planner_modes(ctx.mode)) {
    if (mode == "static") {
      // Static placement does not depend on the UAV speed limit.
      ScenarioConfig cfg = ctx.config;
      cfg.uav_speed_max_mps = 0.0;
      cfg.finalize();
      PlanResult plan = plan_static(tracks, cfg, {});
      evaluate_plan(plan, tracks, cfg, trials);
      for (double v : speeds) {
        rows.push_back({mode, v, plan.bound_min_rate, plan.mc_min_rate,
                        plan.mc_min_rate_se});
      }
      continue;
    }
    // Ascending speeds warm-start from the previous solution, so the
    // attainable set only grows along the sweep.
    PlanResult prev;
    bool have_prev = false;
    for (double v : speeds) {
      ScenarioConfig cfg = ctx.config;
      cfg.uav_speed_max_mps = v;
      cfg.finalize();
      PlanOptions opts;
      if (have_prev && mode == "full") opts.init = &prev.uav_tracks;
      if (have_prev && mode == "current") opts.reference = &prev;
      PlanResult plan = run_mode(mode, tracks, cfg, opts);
      evaluate_plan(plan, tracks, cfg, trials);
      rows.push_back({mode, v, plan.bound_min_rate, plan.mc_min_rate,
                      plan.mc_min_rate_se});
      prev = std::move(plan);
      have_prev = true;
    }
  }

  CsvBuilder csv;
  provenance(csv, ctx, "sweep-speed", trials);
  csv.header({"mode", "v_uav", "min_rate_bound", "min_rate_mc", "se"});
  for (const Row& r : rows) {
    csv.row({r.mode, fmt_g9(r.v), fmt_g9(r.bound), fmt_g9(r.mc),
             fmt_g9(r.se)});
  }
  return finish(ctx, "sweep-speed", csv);
}

std::string run_grouping_sweep(const ExperimentContext& ctx) {
  const int total_users =
      ctx.config.users_per_group * ctx.config.num_groups;

  CsvBuilder csv;
  provenance(csv, ctx, "sweep-groups", 0);
  csv.header({"L", "K", "mode", "min_rate", "status"});

  int valid = 0;
  for (int groups : ctx.group_counts) {
    if (groups < 1 || total_users % groups != 0) {
      throw ConfigError("group count " + std::to_string(groups) +
                        " does not divide the total user count " +
                        std::to_string(total_users));
    }
    const int per_group = total_users / groups;
    for (const std::string& mode : planner_modes(ctx.mode)) {
      if (per_group >= ctx.config.num_uavs) {
        csv.row({std::to_string(groups), std::to_string(per_group), mode, "",
                 "skipped"});
        continue;
      }
      ScenarioConfig cfg = ctx.config;
      cfg.users_per_group = per_group;
      cfg.num_groups = groups;
      cfg.finalize();
      EpisodeTracks tracks;
      tracks.users = generate_user_tracks(cfg);
      const PlanResult plan = run_mode(mode, tracks, cfg, {});
      csv.row({std::to_string(groups), std::to_string(per_group), mode,
               fmt_g9(plan.bound_min_rate), "ok"});
      ++valid;
    }
  }
  if (valid == 0) {
    throw ConfigError("no valid group count (all K >= M)");
  }
  return finish(ctx, "sweep-groups", csv);
}

std::string run_random_matrix_stats(const ExperimentContext& ctx) {
  const ScenarioConfig& cfg = ctx.config;
  const int trials = ctx.trials > 0 ? ctx.trials : 10000;
  const int M = cfg.num_uavs;
  const int K = cfg.users_per_group;

  CsvBuilder csv;
  provenance(csv, ctx, "stats", trials);
  csv.header({"statistic", "theoretical", "empirical", "rel_error", "trials"});

  // Mean trace of the inverse Wishart matrix (G^H G)^-1, G ~ CN(0, I).
  {
    double acc = 0.0;
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(M, K);
    for (int t = 0; t < trials; ++t) {
      PhiloxRng rng(cfg.seed, make_stream(StreamPurpose::McGeneric, 2, 0,
                                          static_cast<std::uint64_t>(t)));
      const ChannelMatrix g = sample_rayleigh(ones, 1.0, rng);
      const Eigen::MatrixXcd gram = g.entries.adjoint() * g.entries;
      acc += gram.inverse().trace().real();
    }
    const double empirical = acc / trials;
    const double theoretical =
        static_cast<double>(K) / static_cast<double>(M - K);
    csv.row({"wishart_inverse_trace", fmt_g9(theoretical), fmt_g9(empirical),
             fmt_g9(std::abs(empirical - theoretical) / theoretical),
             std::to_string(trials)});
  }

  // Mean ZF-projected channel power under the isotropic model, one geometry
  // drop per user.
  {
    const EpisodeTracks tracks = random_drop(cfg);
    for (int l = 0; l < cfg.num_groups; ++l) {
      const Eigen::MatrixXd dist = group_distance_matrix(tracks, cfg, l, 0);
      Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(K);
      for (int t = 0; t < trials; ++t) {
        PhiloxRng rng(cfg.seed,
                      make_stream(StreamPurpose::McGeneric, 3,
                                  static_cast<std::uint64_t>(l),
                                  static_cast<std::uint64_t>(t)));
        const ChannelMatrix h = sample_isotropic(dist, cfg.ref_gain, rng);
        auto sol = try_zf(h.entries, 1.0, 1.0);
        if (!sol) {
          --t;  // resample; vanishing probability under CSCG draws
          continue;
        }
        for (int k = 0; k < K; ++k) {
          const std::complex<double> dot =
              sol->beamformers.col(k).dot(h.entries.col(k));
          acc(k) += std::norm(dot);
        }
      }
      for (int k = 0; k < K; ++k) {
        const double empirical = acc(k) / trials;
        const double sum_inv_d2 =
            dist.col(k).array().square().inverse().sum();
        const double theoretical =
            (M - K + 1) * cfg.ref_gain * sum_inv_d2 / M;
        csv.row({"projected_power_u" + std::to_string(l * K + k),
                 fmt_g9(theoretical), fmt_g9(empirical),
                 fmt_g9(std::abs(empirical - theoretical) / theoretical),
                 std::to_string(trials)});
      }
    }
  }
  return finish(ctx, "stats", csv);
}

std::string run_trajectory_snapshot(const ExperimentContext& ctx) {
  const ScenarioConfig& cfg = ctx.config;
  const int stride = std::max(ctx.stride, 1);

  EpisodeTracks tracks;
  tracks.users = generate_user_tracks(cfg);

  CsvBuilder csv;
  provenance(csv, ctx, "snapshot", 0);
  csv.header({"mode", "episode", "kind", "index", "x", "y"});

  for (const std::string& mode : planner_modes(ctx.mode)) {
    const PlanResult plan = run_mode(mode, tracks, cfg, {});
    for (int n = 0; n < cfg.num_episodes; n += stride) {
      for (int l = 0; l < cfg.num_groups; ++l) {
        for (int k = 0; k < cfg.users_per_group; ++k) {
          csv.row({mode, std::to_string(n + 1), "user",
                   std::to_string(l * cfg.users_per_group + k),
                   fmt_g9(tracks.users.ax(k, l, n)),
                   fmt_g9(tracks.users.by(k, l, n))});
        }
      }
      for (int m = 0; m < cfg.num_uavs; ++m) {
        csv.row({mode, std::to_string(n + 1), "uav", std::to_string(m),
                 fmt_g9(plan.uav_tracks.px(m, n)),
                 fmt_g9(plan.uav_tracks.py(m, n))});
      }
    }
  }
  return finish(ctx, "snapshot", csv);
}

}  // namespace skycomp
