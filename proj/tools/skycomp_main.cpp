#include <clocale>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skycomp/errors.hpp"
#include "skycomp/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 0;
  std::string mode = "all";
  bool dump_subproblems = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "scenario config JSON")
      ->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--trials", args.trials, "Monte-Carlo trials");
  cmd->add_option("--mode", args.mode, "planner mode: full|current|static|all");
  cmd->add_flag("--dump-subproblems", args.dump_subproblems,
                "write per-iteration subproblem JSON dumps");
}

skycomp::ExperimentContext make_context(const CommonArgs& args) {
  skycomp::ExperimentContext ctx;
  ctx.config = skycomp::ScenarioConfig::from_json_file(args.config_path);
  if (args.seed_set) ctx.config.seed = args.seed;
  ctx.out_dir = args.out_dir;
  ctx.trials = args.trials;
  ctx.mode = args.mode;
  ctx.dump_subproblems = args.dump_subproblems;
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_NUMERIC, "C");

  CLI::App app{"multi-UAV coordinated-reception placement experiments"};
  app.require_subcommand(1);

  CommonArgs bounds_args, conv_args, speed_args, group_args, stats_args,
      snap_args;
  std::vector<double> speeds = {0.0, 5.0, 10.0, 15.0, 20.0};
  std::vector<int> group_counts = {2, 3, 6, 9};
  int stride = 1;

  CLI::App* bounds =
      app.add_subcommand("bounds", "bound tightness vs Monte Carlo");
  add_common(bounds, bounds_args);

  CLI::App* conv = app.add_subcommand("converge", "optimizer convergence trace");
  add_common(conv, conv_args);

  CLI::App* speed = app.add_subcommand("sweep-speed", "min rate vs UAV speed");
  add_common(speed, speed_args);
  speed->add_option("--speeds", speeds, "speed list, m/s");

  CLI::App* groups =
      app.add_subcommand("sweep-groups", "min rate vs group count");
  add_common(groups, group_args);
  groups->add_option("--groups", group_counts, "group-count list");

  CLI::App* stats =
      app.add_subcommand("stats", "random-matrix statistics checks");
  add_common(stats, stats_args);

  CLI::App* snap =
      app.add_subcommand("snapshot", "trajectory snapshots per mode");
  add_common(snap, snap_args);
  snap->add_option("--stride", stride, "episode stride between snapshots");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bounds->parsed()) {
      skycomp::run_bounds_tightness(make_context(bounds_args));
    } else if (conv->parsed()) {
      skycomp::run_convergence(make_context(conv_args));
    } else if (speed->parsed()) {
      auto ctx = make_context(speed_args);
      ctx.speeds = speeds;
      skycomp::run_speed_sweep(ctx);
    } else if (groups->parsed()) {
      auto ctx = make_context(group_args);
      ctx.group_counts = group_counts;
      skycomp::run_grouping_sweep(ctx);
    } else if (stats->parsed()) {
      skycomp::run_random_matrix_stats(make_context(stats_args));
    } else if (snap->parsed()) {
      auto ctx = make_context(snap_args);
      ctx.stride = stride;
      skycomp::run_trajectory_snapshot(ctx);
    }
  } catch (const skycomp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const skycomp::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const skycomp::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitOk;
}
