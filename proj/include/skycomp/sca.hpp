#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skycomp/scenario.hpp"

namespace skycomp {

// First-order under-estimator of 1/c at expansion point c_tilde > 0:
// g = 2/c_tilde - c/c_tilde^2.  Affine in c, tangent at c = c_tilde, and
// g(c, c_tilde) <= 1/c for every c > 0.
double linearize_inverse(double c, double c_tilde);

enum class SolveMode { Joint, SingleEpisode, Static };

// One convex placement subproblem: maximize the epigraph rate R subject to
// per-user rate constraints over the auxiliary channel-gain variables c,
// linearized inverse-distance constraints coupling c to the UAV positions,
// and per-episode displacement budgets.
struct SubproblemSpec {
  SolveMode mode = SolveMode::Joint;
  int M = 0, K = 0, L = 0, N = 0;  // N == 1 in SingleEpisode mode

  double gamma_bar = 0.0;    // P tau0 (M-K) / (M sigma^2), multiplies c [m^2]
  double rate_prefactor = 0.0;  // 1/(N L) (Joint, Static) or 1/L (SingleEpisode)
  double altitude = 0.0;

  std::vector<double> user_a;  // (k,l,n), UserTracks indexing
  std::vector<double> user_b;
  std::vector<double> ctilde;  // (k,l,m,n), c_index() ordering

  // Per-(m, n) displacement budgets between episodes n and n+1 (size
  // M*(N-1), Joint mode) or between the anchor and the single episode
  // (size M, SingleEpisode mode with anchors).  Empty in Static mode.
  std::vector<double> disp_budget;
  // Previous-episode positions for SingleEpisode mode; empty when episode 1
  // is solved unanchored.
  std::vector<double> anchor_x, anchor_y;

  // Strictly feasible starting positions: (m,n) grid for Joint /
  // SingleEpisode, one entry per UAV for Static.
  std::vector<double> init_x, init_y;

  double c_min = 1e-12;
  double c_max = 0.0;         // 1/max(H, 1 mm)^2
  double length_scale = 1.0;  // normalization scale for the solver
  double arena_diagonal = 0.0;
  int episode_index = 0;      // provenance for SingleEpisode mode

  // c is stored per (k,l,m,n) with m fastest within an (k,l) slice so each
  // user's rate constraint reads a contiguous block.
  int c_index(int k, int l, int m, int n) const {
    return ((l * K + k) * N + n) * M + m;
  }
  int c_count() const { return K * L * M * N; }
  int position_slots() const;
  int variable_count() const { return 2 * position_slots() + c_count() + 1; }
};

struct KktResiduals {
  double stationarity = 0.0;    // scaled by the objective gradient norm
  double primal = 0.0;          // max constraint violation
  double dual = 0.0;            // max negative dual
  double complementarity = 0.0; // max |dual * slack| (barrier-smoothed)
};

struct SubproblemSolution {
  // Positions expanded onto the full (m, n) grid regardless of mode.
  std::vector<double> x, y;
  std::vector<double> c;  // (k,l,m,n), solver iterate (strictly feasible)
  double rate = 0.0;         // epigraph variable at the solver point
  // Duals recovered from the barrier at the final stage.
  std::vector<double> dual_rate;          // per (k,l)
  std::vector<double> dual_distance;      // per (k,l,m,n), c ordering
  std::vector<double> dual_displacement;  // aligned with spec.disp_budget
  KktResiduals kkt;
  double barrier_mu_final = 0.0;
  int newton_iterations = 0;
  int barrier_stages = 0;
  bool converged = false;

  int pos_idx(int m, int n) const { return n * m_count + m; }
  int m_count = 0;
};

struct BuildOptions {
  int episode = -1;                       // SingleEpisode: which episode
  const UavTracks* anchor = nullptr;      // SingleEpisode: previous positions
  const UavTracks* init = nullptr;        // starting placement
  bool allow_large = false;               // lift the joint-mode N <= 20 guard
};

SubproblemSpec build_subproblem(const EpisodeTracks& tracks,
                                const ScenarioConfig& config,
                                const std::vector<double>& ctilde,
                                SolveMode mode,
                                const BuildOptions& options = {});

struct SolverOptions {
  double barrier_mu0 = 1.0;       // initial barrier parameter
  double barrier_mu_final = 1e-8;
  double barrier_shrink = 0.1;    // x10 reduction per stage
  double newton_tol = 1e-8;       // inner gradient tolerance
  double armijo_slope = 0.01;
  double backtrack = 0.5;
  int max_newton_per_stage = 120;
  bool dump = false;
  std::string dump_path;
};

// Primal log-barrier interior-point solve with dense Newton steps.
// Throws NumericalError when the starting point is not strictly feasible
// (infeasibility certificate in the message) or Newton stagnates.
SubproblemSolution solve_convex_subproblem(const SubproblemSpec& spec,
                                           const SolverOptions& options = {});

struct ScaIterate {
  double rate = 0.0;       // true lower-bound objective at these positions
  UavTracks tracks;
  std::vector<double> c_tight;  // 1/d^2 at these positions, (k,l,m,n)
  SubproblemSolution solution;  // raw subproblem iterate (empty at init)
  SubproblemSpec spec;          // the subproblem this iterate solved
  bool has_solution = false;
};

struct ScaResult {
  std::vector<ScaIterate> trace;  // trace[0] is the initial placement
  int solves = 0;                 // subproblem solver invocations
  const ScaIterate& final_iterate() const { return trace.back(); }
  int iterations() const { return static_cast<int>(trace.size()) - 1; }
};

struct ScaOptions {
  double epsilon = 1e-3;  // outer stopping threshold on rate improvement
  int max_outer = 50;
  SolverOptions solver;
  double warm_mu0 = 1e-2;  // barrier restart for outer iterations >= 2
  int episode = -1;                  // SingleEpisode mode
  const UavTracks* anchor = nullptr; // SingleEpisode mode
  bool allow_large = false;
};

// Successive convex approximation outer loop: solve, re-expand the
// linearization at the new positions, repeat until the objective gain drops
// below epsilon.  The recorded trace is nondecreasing; an iterate that fails
// to improve terminates the loop and is discarded.
ScaResult run_sca(const EpisodeTracks& tracks, const ScenarioConfig& config,
                  SolveMode mode, const UavTracks& init,
                  const ScaOptions& options = {});

struct WeightedAverageReport {
  // Residuals of the dual-weighted fixed-point equations for the UAV
  // positions, one per (m, n) position block.
  std::vector<double> residual_x, residual_y;
  std::vector<bool> indeterminate;  // all duals ~ 0 for this block
  double max_residual = 0.0;        // over determinate blocks
  int determinate_count = 0;
};

// Checks that every optimized UAV position equals the dual-weighted average
// of user positions and adjacent-episode positions implied by stationarity.
WeightedAverageReport verify_weighted_average(const SubproblemSolution& sol,
                                              const SubproblemSpec& spec);

// Tight auxiliary variables 1/d^2 for given positions (clamped to the c
// box); d^2 is floored at 1 mm^2 so ground-level deployments stay finite.
std::vector<double> tight_c_from_positions(const SubproblemSpec& spec,
                                           const std::vector<double>& x,
                                           const std::vector<double>& y);

// The true (non-linearized) lower-bound objective at given positions.
double bound_objective_at(const SubproblemSpec& spec,
                          const std::vector<double>& x,
                          const std::vector<double>& y);

// Starting placement expanded onto the full (m, n) grid.
std::vector<double> expand_positions_x(const SubproblemSpec& spec);
std::vector<double> expand_positions_y(const SubproblemSpec& spec);

}  // namespace skycomp
