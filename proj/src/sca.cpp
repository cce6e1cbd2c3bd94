#include "skycomp/sca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "skycomp/errors.hpp"

namespace skycomp {

namespace {

constexpr double kLog2 = 0.6931471805599453;
constexpr double kMinGroundDistance = 1e-3;  // m, floor for H = 0 layouts

double floored_d2(double dx, double dy, double h2) {
  const double d2 = dx * dx + dy * dy + h2;
  return std::max(d2, kMinGroundDistance * kMinGroundDistance);
}

}  // namespace

double linearize_inverse(double c, double c_tilde) {
  if (!(c_tilde > 0.0)) {
    throw NumericalError("linearize_inverse requires c_tilde > 0");
  }
  return 2.0 / c_tilde - c / (c_tilde * c_tilde);
}

int SubproblemSpec::position_slots() const {
  if (mode == SolveMode::Static) return M;
  if (mode == SolveMode::SingleEpisode) {
    if (anchor_x.empty()) return M;
    int slots = 0;
    for (int m = 0; m < M; ++m) {
      if (disp_budget[m] > 0.0) ++slots;  // zero budget pins the position
    }
    return slots;
  }
  // Joint: a zero budget ties episode n+1 to episode n.
  int slots = 0;
  for (int m = 0; m < M; ++m) {
    ++slots;
    for (int n = 0; n + 1 < N; ++n) {
      if (disp_budget[static_cast<size_t>(n) * M + m] > 0.0) ++slots;
    }
  }
  return slots;
}

std::vector<double> expand_positions_x(const SubproblemSpec& spec) {
  std::vector<double> x(static_cast<size_t>(spec.M) * spec.N);
  const int init_rows =
      static_cast<int>(spec.init_x.size()) / std::max(spec.M, 1);
  for (int n = 0; n < spec.N; ++n) {
    const int src_n = std::min(n, init_rows - 1);
    for (int m = 0; m < spec.M; ++m) {
      x[static_cast<size_t>(n) * spec.M + m] =
          spec.init_x[static_cast<size_t>(src_n) * spec.M + m];
    }
  }
  return x;
}

std::vector<double> expand_positions_y(const SubproblemSpec& spec) {
  std::vector<double> y(static_cast<size_t>(spec.M) * spec.N);
  const int init_rows =
      static_cast<int>(spec.init_y.size()) / std::max(spec.M, 1);
  for (int n = 0; n < spec.N; ++n) {
    const int src_n = std::min(n, init_rows - 1);
    for (int m = 0; m < spec.M; ++m) {
      y[static_cast<size_t>(n) * spec.M + m] =
          spec.init_y[static_cast<size_t>(src_n) * spec.M + m];
    }
  }
  return y;
}

std::vector<double> tight_c_from_positions(const SubproblemSpec& spec,
                                           const std::vector<double>& x,
                                           const std::vector<double>& y) {
  std::vector<double> c(spec.c_count());
  const double h2 = spec.altitude * spec.altitude;
  for (int l = 0; l < spec.L; ++l) {
    for (int k = 0; k < spec.K; ++k) {
      for (int n = 0; n < spec.N; ++n) {
        const size_t uidx = (static_cast<size_t>(n) * spec.L + l) * spec.K + k;
        const double a = spec.user_a[uidx];
        const double b = spec.user_b[uidx];
        for (int m = 0; m < spec.M; ++m) {
          const size_t pidx = static_cast<size_t>(n) * spec.M + m;
          const double d2 = floored_d2(x[pidx] - a, y[pidx] - b, h2);
          c[spec.c_index(k, l, m, n)] =
              std::clamp(1.0 / d2, spec.c_min, spec.c_max);
        }
      }
    }
  }
  return c;
}

double bound_objective_at(const SubproblemSpec& spec,
                          const std::vector<double>& x,
                          const std::vector<double>& y) {
  const std::vector<double> c = tight_c_from_positions(spec, x, y);
  double min_rate = std::numeric_limits<double>::infinity();
  for (int l = 0; l < spec.L; ++l) {
    for (int k = 0; k < spec.K; ++k) {
      double rate = 0.0;
      for (int n = 0; n < spec.N; ++n) {
        double sum_c = 0.0;
        for (int m = 0; m < spec.M; ++m) {
          sum_c += c[spec.c_index(k, l, m, n)];
        }
        rate += std::log1p(spec.gamma_bar * sum_c) / kLog2;
      }
      min_rate = std::min(min_rate, spec.rate_prefactor * rate);
    }
  }
  return min_rate;
}

SubproblemSpec build_subproblem(const EpisodeTracks& tracks,
                                const ScenarioConfig& config,
                                const std::vector<double>& ctilde,
                                SolveMode mode, const BuildOptions& options) {
  SubproblemSpec spec;
  spec.mode = mode;
  spec.M = config.num_uavs;
  spec.K = config.users_per_group;
  spec.L = config.num_groups;
  spec.N = (mode == SolveMode::SingleEpisode) ? 1 : config.num_episodes;

  const double mk =
      static_cast<double>(config.num_uavs - config.users_per_group);
  spec.gamma_bar = config.tx_power_w * config.ref_gain * mk /
                   (config.num_uavs * config.noise_power_w);
  spec.rate_prefactor =
      1.0 / (static_cast<double>(spec.N) * config.num_groups);
  spec.altitude = config.altitude_m;
  spec.c_min = 1e-12;
  const double floor_d = std::max(config.altitude_m, kMinGroundDistance);
  spec.c_max = 1.0 / (floor_d * floor_d);
  spec.arena_diagonal = config.arena.diagonal();
  spec.length_scale =
      std::max({config.altitude_m, config.arena.diagonal() / 20.0, 1.0});
  spec.episode_index = std::max(options.episode, 0);

  if (mode == SolveMode::Joint && spec.N > 20 && !options.allow_large) {
    throw ConfigError(
        "joint mode limited to N <= 20 (dense Newton); set allow_large");
  }

  const int n0 = (mode == SolveMode::SingleEpisode) ? options.episode : 0;
  if (mode == SolveMode::SingleEpisode &&
      (n0 < 0 || n0 >= config.num_episodes)) {
    throw ConfigError("single-episode subproblem needs a valid episode");
  }
  spec.user_a.resize(static_cast<size_t>(spec.K) * spec.L * spec.N);
  spec.user_b.resize(spec.user_a.size());
  for (int n = 0; n < spec.N; ++n) {
    for (int l = 0; l < spec.L; ++l) {
      for (int k = 0; k < spec.K; ++k) {
        const size_t dst = (static_cast<size_t>(n) * spec.L + l) * spec.K + k;
        spec.user_a[dst] = tracks.users.ax(k, l, n0 + n);
        spec.user_b[dst] = tracks.users.by(k, l, n0 + n);
      }
    }
  }

  const double budget = config.displacement_budget_m;
  if (mode == SolveMode::Joint && spec.N > 1) {
    spec.disp_budget.assign(static_cast<size_t>(spec.M) * (spec.N - 1),
                            budget);
  } else if (mode == SolveMode::SingleEpisode && options.anchor != nullptr) {
    spec.disp_budget.assign(spec.M, budget);
    spec.anchor_x.resize(spec.M);
    spec.anchor_y.resize(spec.M);
    for (int m = 0; m < spec.M; ++m) {
      spec.anchor_x[m] = options.anchor->px(m, 0);
      spec.anchor_y[m] = options.anchor->py(m, 0);
    }
  }

  const UavTracks* init = options.init;
  if (init != nullptr) {
    const int n_init = (mode == SolveMode::Static) ? 1 : spec.N;
    spec.init_x.resize(static_cast<size_t>(spec.M) * n_init);
    spec.init_y.resize(spec.init_x.size());
    for (int n = 0; n < n_init; ++n) {
      const int src_n = std::min(n, init->N - 1);
      for (int m = 0; m < spec.M; ++m) {
        spec.init_x[static_cast<size_t>(n) * spec.M + m] = init->px(m, src_n);
        spec.init_y[static_cast<size_t>(n) * spec.M + m] = init->py(m, src_n);
      }
    }
  } else if (!spec.anchor_x.empty()) {
    spec.init_x = spec.anchor_x;  // anchor is always feasible
    spec.init_y = spec.anchor_y;
  } else {
    throw ConfigError("subproblem needs a starting placement");
  }

  if (ctilde.empty()) {
    spec.ctilde = tight_c_from_positions(spec, expand_positions_x(spec),
                                         expand_positions_y(spec));
  } else {
    if (static_cast<int>(ctilde.size()) != spec.c_count()) {
      throw ConfigError("ctilde has the wrong shape");
    }
    spec.ctilde = ctilde;
  }
  for (double& c : spec.ctilde) {
    c = std::clamp(c, spec.c_min * 1.02, spec.c_max);
  }
  if (spec.variable_count() > 6000) {
    throw ConfigError(
        "subproblem exceeds the dense-Newton desk-scale limit (" +
        std::to_string(spec.variable_count()) +
        " variables); reduce N or use receding-horizon planning");
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Barrier solver internals.  Everything below works in normalized units:
// positions divided by the length scale S, c multiplied by S^2, so slacks
// and curvatures are O(1).
// ---------------------------------------------------------------------------

namespace {

struct DispPair {
  int slot_a = -1;
  int slot_b = -1;  // -1: anchored to the fixed point (fx, fy)
  double fx = 0.0, fy = 0.0;
  double budget2 = 0.0;
  int spec_index = 0;
};

struct Normalized {
  int M = 0, K = 0, L = 0, N = 0;
  int n_slots = 0;
  int n_c = 0;
  int n_z = 0;
  double w = 0.0;
  double gamma_hat = 0.0;
  double h2 = 0.0;
  double u_min = 0.0, u_max = 0.0;
  double S = 1.0;

  std::vector<int> slot_of;              // (m,n) grid -> slot or -1
  std::vector<double> fixed_x, fixed_y;  // per (m,n), used when slot == -1

  std::vector<double> con_a, con_b, ut;  // per c index
  std::vector<int> con_slot;
  std::vector<double> con_fx, con_fy;

  std::vector<DispPair> disp;

  int xi(int s) const { return 2 * s; }
  int yi(int s) const { return 2 * s + 1; }
  int ui(int i) const { return 2 * n_slots + i; }
  int ri() const { return n_z - 1; }
};

Normalized normalize(const SubproblemSpec& spec) {
  Normalized p;
  p.M = spec.M;
  p.K = spec.K;
  p.L = spec.L;
  p.N = spec.N;
  p.w = spec.rate_prefactor;
  p.S = spec.length_scale;
  p.gamma_hat = spec.gamma_bar / (p.S * p.S);
  const double hn = spec.altitude / p.S;
  p.h2 = hn * hn;
  p.u_min = spec.c_min * p.S * p.S;
  // Headroom over 1/H^2 keeps the box from co-binding with a linearized
  // distance constraint at an overhead UAV (the distance constraint alone
  // already enforces c <= 1/H^2 for any expansion point below that value,
  // so the feasible set is unchanged and the degenerate corner disappears).
  p.u_max = 1.05 * spec.c_max * p.S * p.S;
  p.n_c = spec.c_count();

  p.slot_of.assign(static_cast<size_t>(p.M) * p.N, -1);
  p.fixed_x.assign(p.slot_of.size(), 0.0);
  p.fixed_y.assign(p.slot_of.size(), 0.0);

  int slots = 0;
  if (spec.mode == SolveMode::Static) {
    for (int m = 0; m < p.M; ++m) {
      for (int n = 0; n < p.N; ++n) p.slot_of[n * p.M + m] = m;
    }
    slots = p.M;
  } else if (spec.mode == SolveMode::SingleEpisode) {
    for (int m = 0; m < p.M; ++m) {
      if (!spec.anchor_x.empty() && spec.disp_budget[m] <= 0.0) {
        p.fixed_x[m] = spec.anchor_x[m] / p.S;
        p.fixed_y[m] = spec.anchor_y[m] / p.S;
      } else {
        p.slot_of[m] = slots++;
        if (!spec.anchor_x.empty()) {
          DispPair d;
          d.slot_a = p.slot_of[m];
          d.fx = spec.anchor_x[m] / p.S;
          d.fy = spec.anchor_y[m] / p.S;
          const double b = spec.disp_budget[m] / p.S;
          d.budget2 = b * b;
          d.spec_index = m;
          p.disp.push_back(d);
        }
      }
    }
  } else {
    for (int m = 0; m < p.M; ++m) {
      p.slot_of[m] = slots++;  // episode 0
      for (int n = 0; n + 1 < p.N; ++n) {
        const size_t bi = static_cast<size_t>(n) * p.M + m;
        if (spec.disp_budget[bi] <= 0.0) {
          p.slot_of[(n + 1) * p.M + m] = p.slot_of[n * p.M + m];
        } else {
          p.slot_of[(n + 1) * p.M + m] = slots++;
          DispPair d;
          d.slot_a = p.slot_of[n * p.M + m];
          d.slot_b = p.slot_of[(n + 1) * p.M + m];
          const double b = spec.disp_budget[bi] / p.S;
          d.budget2 = b * b;
          d.spec_index = static_cast<int>(bi);
          p.disp.push_back(d);
        }
      }
    }
  }
  p.n_slots = slots;
  p.n_z = 2 * p.n_slots + p.n_c + 1;

  p.con_a.resize(p.n_c);
  p.con_b.resize(p.n_c);
  p.ut.resize(p.n_c);
  p.con_slot.resize(p.n_c);
  p.con_fx.resize(p.n_c);
  p.con_fy.resize(p.n_c);
  for (int l = 0; l < p.L; ++l) {
    for (int k = 0; k < p.K; ++k) {
      for (int n = 0; n < p.N; ++n) {
        const size_t uidx = (static_cast<size_t>(n) * p.L + l) * p.K + k;
        for (int m = 0; m < p.M; ++m) {
          const int i = spec.c_index(k, l, m, n);
          p.con_a[i] = spec.user_a[uidx] / p.S;
          p.con_b[i] = spec.user_b[uidx] / p.S;
          p.ut[i] = spec.ctilde[i] * p.S * p.S;
          const size_t grid = static_cast<size_t>(n) * p.M + m;
          p.con_slot[i] = p.slot_of[grid];
          p.con_fx[i] = p.fixed_x[grid];
          p.con_fy[i] = p.fixed_y[grid];
        }
      }
    }
  }
  return p;
}

struct Slacks {
  Eigen::VectorXd dist;            // per c index
  Eigen::VectorXd rate;            // per (k,l)
  Eigen::VectorXd disp;            // per displacement pair
  Eigen::VectorXd box_lo, box_hi;  // per c index
  Eigen::VectorXd sigma;           // per (k,l,n): sum_m u
};

bool eval_slacks(const Normalized& p, const Eigen::VectorXd& z, Slacks& s) {
  const int users = p.K * p.L;
  s.dist.resize(p.n_c);
  s.rate.resize(users);
  s.disp.resize(static_cast<Eigen::Index>(p.disp.size()));
  s.box_lo.resize(p.n_c);
  s.box_hi.resize(p.n_c);
  s.sigma.resize(users * p.N);

  for (int i = 0; i < p.n_c; ++i) {
    const double u = z[p.ui(i)];
    s.box_lo[i] = u - p.u_min;
    s.box_hi[i] = p.u_max - u;
    if (s.box_lo[i] <= 0.0 || s.box_hi[i] <= 0.0) return false;
    const int slot = p.con_slot[i];
    const double px = slot >= 0 ? z[p.xi(slot)] : p.con_fx[i];
    const double py = slot >= 0 ? z[p.yi(slot)] : p.con_fy[i];
    const double dx = px - p.con_a[i];
    const double dy = py - p.con_b[i];
    const double ut = p.ut[i];
    s.dist[i] = (2.0 * ut - u) / (ut * ut) - (dx * dx + dy * dy + p.h2);
    if (s.dist[i] <= 0.0) return false;
  }

  const double r = z[p.ri()];
  for (int ug = 0; ug < users; ++ug) {
    double sum = 0.0;
    for (int n = 0; n < p.N; ++n) {
      double sig = 0.0;
      const int base = p.ui((ug * p.N + n) * p.M);
      for (int m = 0; m < p.M; ++m) sig += z[base + m];
      s.sigma[ug * p.N + n] = sig;
      sum += std::log1p(p.gamma_hat * sig) / kLog2;
    }
    s.rate[ug] = p.w * sum - r;
    if (s.rate[ug] <= 0.0) return false;
  }

  for (size_t d = 0; d < p.disp.size(); ++d) {
    const DispPair& dp = p.disp[d];
    const double ax = z[p.xi(dp.slot_a)];
    const double ay = z[p.yi(dp.slot_a)];
    const double bx = dp.slot_b >= 0 ? z[p.xi(dp.slot_b)] : dp.fx;
    const double by = dp.slot_b >= 0 ? z[p.yi(dp.slot_b)] : dp.fy;
    const double dx = ax - bx;
    const double dy = ay - by;
    s.disp[static_cast<Eigen::Index>(d)] = dp.budget2 - (dx * dx + dy * dy);
    if (s.disp[static_cast<Eigen::Index>(d)] <= 0.0) return false;
  }
  return true;
}

// Per-user minimum of the rate expression at the current u, independent of R.
double implied_min_rate(const Normalized& p, const Eigen::VectorXd& z) {
  const int users = p.K * p.L;
  double min_rate = std::numeric_limits<double>::infinity();
  for (int ug = 0; ug < users; ++ug) {
    double sum = 0.0;
    for (int n = 0; n < p.N; ++n) {
      double sig = 0.0;
      const int base = p.ui((ug * p.N + n) * p.M);
      for (int m = 0; m < p.M; ++m) sig += z[base + m];
      sum += std::log1p(p.gamma_hat * sig) / kLog2;
    }
    min_rate = std::min(min_rate, p.w * sum);
  }
  return min_rate;
}

std::string first_violation(const Normalized& p, const Eigen::VectorXd& z) {
  Slacks s;
  const int users = p.K * p.L;
  s.dist.resize(p.n_c);
  for (int i = 0; i < p.n_c; ++i) {
    const double u = z[p.ui(i)];
    if (u - p.u_min <= 0.0 || p.u_max - u <= 0.0) {
      return "c box constraint " + std::to_string(i);
    }
    const int slot = p.con_slot[i];
    const double px = slot >= 0 ? z[p.xi(slot)] : p.con_fx[i];
    const double py = slot >= 0 ? z[p.yi(slot)] : p.con_fy[i];
    const double dx = px - p.con_a[i];
    const double dy = py - p.con_b[i];
    const double ut = p.ut[i];
    if ((2.0 * ut - u) / (ut * ut) - (dx * dx + dy * dy + p.h2) <= 0.0) {
      return "linearized distance constraint " + std::to_string(i);
    }
  }
  for (size_t d = 0; d < p.disp.size(); ++d) {
    const DispPair& dp = p.disp[d];
    const double ax = z[p.xi(dp.slot_a)];
    const double ay = z[p.yi(dp.slot_a)];
    const double bx = dp.slot_b >= 0 ? z[p.xi(dp.slot_b)] : dp.fx;
    const double by = dp.slot_b >= 0 ? z[p.yi(dp.slot_b)] : dp.fy;
    if (dp.budget2 - ((ax - bx) * (ax - bx) + (ay - by) * (ay - by)) <= 0.0) {
      return "displacement constraint " + std::to_string(d);
    }
  }
  (void)users;
  return "rate constraint";
}

// Smallest ratio of trial to current slack across all constraint families.
// A Newton step that collapses a slack by orders of magnitude leaves the
// central path and strands the iterate crawling along that boundary.
double min_slack_ratio(const Slacks& trial, const Slacks& cur) {
  double r = std::numeric_limits<double>::infinity();
  const auto scan = [&r](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      r = std::min(r, a[i] / b[i]);
    }
  };
  scan(trial.dist, cur.dist);
  scan(trial.rate, cur.rate);
  scan(trial.disp, cur.disp);
  scan(trial.box_lo, cur.box_lo);
  scan(trial.box_hi, cur.box_hi);
  return r;
}

// Exact 1-D centering of the epigraph variable: R enters every rate slack
// linearly, so solving  sum_k mu / (rate_k - R) = 1  places R on its
// conditional central path given the other variables.  This pins every rate
// slack at or above mu and removes the boundary-crawl failure mode when a
// stage change shifts the active set.  Updates z and the rate slacks.
void recenter_epigraph(const Normalized& p, Eigen::VectorXd& z, Slacks& s,
                       double mu) {
  const int users = p.K * p.L;
  const double r0 = z[p.ri()];
  double min_rate = std::numeric_limits<double>::infinity();
  for (int ug = 0; ug < users; ++ug) {
    min_rate = std::min(min_rate, s.rate[ug] + r0);
  }
  // f(R) = sum mu/(rate_k - R) - 1 is increasing in R on (-inf, min_rate).
  double hi = min_rate;              // f -> +inf
  double lo = min_rate - users * mu; // f(lo) >= sum mu/(users*mu) - 1 >= 0
  // Walk lo out until f(lo) <= 0.
  for (int guard = 0; guard < 200; ++guard) {
    double f = -1.0;
    for (int ug = 0; ug < users; ++ug) {
      f += mu / (s.rate[ug] + r0 - lo);
    }
    if (f <= 0.0) break;
    lo = min_rate - 2.0 * (min_rate - lo);
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bisection hit double resolution
    double f = -1.0;
    for (int ug = 0; ug < users; ++ug) {
      f += mu / (s.rate[ug] + r0 - mid);
    }
    (f > 0.0 ? hi : lo) = mid;
  }
  const double r_new = lo;
  for (int ug = 0; ug < users; ++ug) {
    s.rate[ug] += r0 - r_new;
  }
  z[p.ri()] = r_new;
}

double barrier_value(const Normalized& p, const Eigen::VectorXd& z,
                     const Slacks& s, double mu) {
  double phi = -z[p.ri()];
  phi -= mu * s.dist.array().log().sum();
  phi -= mu * s.rate.array().log().sum();
  if (s.disp.size() > 0) phi -= mu * s.disp.array().log().sum();
  phi -= mu * s.box_lo.array().log().sum();
  phi -= mu * s.box_hi.array().log().sum();
  return phi;
}

// Cheap gradient-only evaluation for the line-search endgame, where the
// barrier value changes by less than double-precision resolution.
void gradient_only(const Normalized& p, const Eigen::VectorXd& z,
                   const Slacks& s, double mu, Eigen::VectorXd& grad) {
  grad.setZero(p.n_z);
  grad[p.ri()] = -1.0;

  for (int i = 0; i < p.n_c; ++i) {
    grad[p.ui(i)] += mu * (1.0 / s.box_hi[i] - 1.0 / s.box_lo[i]);
  }
  for (int i = 0; i < p.n_c; ++i) {
    const double inv_s = 1.0 / s.dist[i];
    const double gu = -1.0 / (p.ut[i] * p.ut[i]);
    const int slot = p.con_slot[i];
    if (slot >= 0) {
      grad[p.xi(slot)] += 2.0 * mu * inv_s * (z[p.xi(slot)] - p.con_a[i]);
      grad[p.yi(slot)] += 2.0 * mu * inv_s * (z[p.yi(slot)] - p.con_b[i]);
    }
    grad[p.ui(i)] += -mu * inv_s * gu;
  }
  const int users = p.K * p.L;
  for (int ug = 0; ug < users; ++ug) {
    const double inv_s = 1.0 / s.rate[ug];
    const int base = p.ui(ug * p.N * p.M);
    for (int n = 0; n < p.N; ++n) {
      const double den = 1.0 + p.gamma_hat * s.sigma[ug * p.N + n];
      const double rho = p.w * p.gamma_hat / (kLog2 * den);
      for (int m = 0; m < p.M; ++m) grad[base + n * p.M + m] -= mu * inv_s * rho;
    }
    grad[p.ri()] += mu * inv_s;
  }
  for (size_t d = 0; d < p.disp.size(); ++d) {
    const DispPair& dp = p.disp[d];
    const double inv_s = 1.0 / s.disp[static_cast<Eigen::Index>(d)];
    const double bx = dp.slot_b >= 0 ? z[p.xi(dp.slot_b)] : dp.fx;
    const double by = dp.slot_b >= 0 ? z[p.yi(dp.slot_b)] : dp.fy;
    const double dx = z[p.xi(dp.slot_a)] - bx;
    const double dy = z[p.yi(dp.slot_a)] - by;
    grad[p.xi(dp.slot_a)] += 2.0 * mu * inv_s * dx;
    grad[p.yi(dp.slot_a)] += 2.0 * mu * inv_s * dy;
    if (dp.slot_b >= 0) {
      grad[p.xi(dp.slot_b)] -= 2.0 * mu * inv_s * dx;
      grad[p.yi(dp.slot_b)] -= 2.0 * mu * inv_s * dy;
    }
  }
}

void assemble(const Normalized& p, const Eigen::VectorXd& z, const Slacks& s,
              double mu, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  grad.setZero(p.n_z);
  hess.setZero(p.n_z, p.n_z);
  grad[p.ri()] = -1.0;  // objective: minimize -R

  for (int i = 0; i < p.n_c; ++i) {
    const int iu = p.ui(i);
    grad[iu] += mu * (1.0 / s.box_hi[i] - 1.0 / s.box_lo[i]);
    hess(iu, iu) += mu * (1.0 / (s.box_hi[i] * s.box_hi[i]) +
                          1.0 / (s.box_lo[i] * s.box_lo[i]));
  }

  // Distance constraints: slack = (2ut - u)/ut^2 - |pos - user|^2 - h^2.
  for (int i = 0; i < p.n_c; ++i) {
    const double inv_s = 1.0 / s.dist[i];
    const double gu = -1.0 / (p.ut[i] * p.ut[i]);  // d slack / d u
    const int iu = p.ui(i);
    const int slot = p.con_slot[i];
    const double q = mu * inv_s * inv_s;
    if (slot >= 0) {
      const int ix = p.xi(slot);
      const int iy = p.yi(slot);
      const double gx = -2.0 * (z[ix] - p.con_a[i]);
      const double gy = -2.0 * (z[iy] - p.con_b[i]);
      grad[ix] += -mu * inv_s * gx;
      grad[iy] += -mu * inv_s * gy;
      grad[iu] += -mu * inv_s * gu;
      hess(ix, ix) += q * gx * gx + 2.0 * mu * inv_s;
      hess(iy, iy) += q * gy * gy + 2.0 * mu * inv_s;
      hess(iu, iu) += q * gu * gu;
      hess(ix, iy) += q * gx * gy;
      hess(iy, ix) += q * gx * gy;
      hess(ix, iu) += q * gx * gu;
      hess(iu, ix) += q * gx * gu;
      hess(iy, iu) += q * gy * gu;
      hess(iu, iy) += q * gy * gu;
    } else {
      grad[iu] += -mu * inv_s * gu;
      hess(iu, iu) += q * gu * gu;
    }
  }

  // Rate constraints: slack = w sum_n log2(1 + gamma sigma_n) - R.
  const int users = p.K * p.L;
  std::vector<double> rho(p.N), kappa(p.N);
  for (int ug = 0; ug < users; ++ug) {
    const double inv_s = 1.0 / s.rate[ug];
    for (int n = 0; n < p.N; ++n) {
      const double den = 1.0 + p.gamma_hat * s.sigma[ug * p.N + n];
      rho[n] = p.w * p.gamma_hat / (kLog2 * den);
      kappa[n] = p.w * p.gamma_hat * p.gamma_hat / (kLog2 * den * den);
    }
    const int base = p.ui(ug * p.N * p.M);
    const int ir = p.ri();
    for (int n = 0; n < p.N; ++n) {
      const double g = -mu * inv_s * rho[n];
      for (int m = 0; m < p.M; ++m) grad[base + n * p.M + m] += g;
    }
    grad[ir] += mu * inv_s;

    const double q = mu * inv_s * inv_s;
    // Column-major fill of the contiguous u block for this user.
    double* data = hess.data();
    const auto nz = static_cast<ptrdiff_t>(p.n_z);
    for (int n2 = 0; n2 < p.N; ++n2) {
      for (int m2 = 0; m2 < p.M; ++m2) {
        const int col = base + n2 * p.M + m2;
        double* colp = data + static_cast<ptrdiff_t>(col) * nz;
        for (int n1 = 0; n1 < p.N; ++n1) {
          const double v = q * rho[n1] * rho[n2] +
                           ((n1 == n2) ? mu * inv_s * kappa[n1] : 0.0);
          double* cp = colp + base + n1 * p.M;
          for (int m1 = 0; m1 < p.M; ++m1) cp[m1] += v;
        }
      }
    }
    for (int n1 = 0; n1 < p.N; ++n1) {
      const double vr = -q * rho[n1];
      for (int m1 = 0; m1 < p.M; ++m1) {
        const int r0 = base + n1 * p.M + m1;
        hess(r0, ir) += vr;
        hess(ir, r0) += vr;
      }
    }
    hess(ir, ir) += q;
  }

  // Displacement constraints: slack = D^2 - |pa - pb|^2.
  for (size_t d = 0; d < p.disp.size(); ++d) {
    const DispPair& dp = p.disp[d];
    const double inv_s = 1.0 / s.disp[static_cast<Eigen::Index>(d)];
    const int iax = p.xi(dp.slot_a);
    const int iay = p.yi(dp.slot_a);
    const double bx = dp.slot_b >= 0 ? z[p.xi(dp.slot_b)] : dp.fx;
    const double by = dp.slot_b >= 0 ? z[p.yi(dp.slot_b)] : dp.fy;
    const double dx = z[iax] - bx;
    const double dy = z[iay] - by;
    const double gax = -2.0 * dx;
    const double gay = -2.0 * dy;
    const double q = mu * inv_s * inv_s;
    grad[iax] += -mu * inv_s * gax;
    grad[iay] += -mu * inv_s * gay;
    hess(iax, iax) += q * gax * gax + 2.0 * mu * inv_s;
    hess(iay, iay) += q * gay * gay + 2.0 * mu * inv_s;
    hess(iax, iay) += q * gax * gay;
    hess(iay, iax) += q * gax * gay;
    if (dp.slot_b >= 0) {
      const int ibx = p.xi(dp.slot_b);
      const int iby = p.yi(dp.slot_b);
      const double gbx = 2.0 * dx;
      const double gby = 2.0 * dy;
      grad[ibx] += -mu * inv_s * gbx;
      grad[iby] += -mu * inv_s * gby;
      hess(ibx, ibx) += q * gbx * gbx + 2.0 * mu * inv_s;
      hess(iby, iby) += q * gby * gby + 2.0 * mu * inv_s;
      hess(ibx, iby) += q * gbx * gby;
      hess(iby, ibx) += q * gbx * gby;
      hess(iax, ibx) += q * gax * gbx - 2.0 * mu * inv_s;
      hess(ibx, iax) += q * gax * gbx - 2.0 * mu * inv_s;
      hess(iay, iby) += q * gay * gby - 2.0 * mu * inv_s;
      hess(iby, iay) += q * gay * gby - 2.0 * mu * inv_s;
      hess(iax, iby) += q * gax * gby;
      hess(iby, iax) += q * gax * gby;
      hess(iay, ibx) += q * gay * gbx;
      hess(ibx, iay) += q * gay * gbx;
    }
  }
}

double slot_pos_x(const SubproblemSolution& sol, const Normalized& p,
                  int slot) {
  for (size_t g = 0; g < p.slot_of.size(); ++g) {
    if (p.slot_of[g] == slot) return sol.x[g];
  }
  return 0.0;
}

double slot_pos_y(const SubproblemSolution& sol, const Normalized& p,
                  int slot) {
  for (size_t g = 0; g < p.slot_of.size(); ++g) {
    if (p.slot_of[g] == slot) return sol.y[g];
  }
  return 0.0;
}

void dump_json(const SubproblemSpec& spec, const SubproblemSolution& sol,
               const std::string& path) {
  nlohmann::json j;
  j["mode"] = static_cast<int>(spec.mode);
  j["M"] = spec.M;
  j["K"] = spec.K;
  j["L"] = spec.L;
  j["N"] = spec.N;
  j["gamma_bar"] = spec.gamma_bar;
  j["rate_prefactor"] = spec.rate_prefactor;
  j["episode_index"] = spec.episode_index;
  j["rate"] = sol.rate;
  j["x"] = sol.x;
  j["y"] = sol.y;
  j["kkt"] = {{"stationarity", sol.kkt.stationarity},
              {"primal", sol.kkt.primal},
              {"dual", sol.kkt.dual},
              {"complementarity", sol.kkt.complementarity}};
  j["newton_iterations"] = sol.newton_iterations;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write subproblem dump: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

SubproblemSolution solve_convex_subproblem(const SubproblemSpec& spec,
                                           const SolverOptions& options) {
  const Normalized p = normalize(spec);

  // Strictly feasible start: provided positions, c = 0.99 ctilde, R just
  // below the implied minimum rate.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(p.n_z);
  {
    std::vector<bool> seen(p.n_slots, false);
    const int init_rows =
        static_cast<int>(spec.init_x.size()) / std::max(spec.M, 1);
    for (int n = 0; n < p.N; ++n) {
      const int src_n = std::min(n, init_rows - 1);
      for (int m = 0; m < p.M; ++m) {
        const int slot = p.slot_of[static_cast<size_t>(n) * p.M + m];
        if (slot >= 0 && !seen[slot]) {
          seen[slot] = true;
          z[p.xi(slot)] =
              spec.init_x[static_cast<size_t>(src_n) * p.M + m] / p.S;
          z[p.yi(slot)] =
              spec.init_y[static_cast<size_t>(src_n) * p.M + m] / p.S;
        }
      }
    }
  }
  for (int i = 0; i < p.n_c; ++i) {
    z[p.ui(i)] = std::min(0.99 * p.ut[i], 0.999 * p.u_max);
  }
  // The initial rate slack tracks the first barrier stage: the central path
  // keeps the binding rate slack near mu, and starting 4+ orders tighter
  // makes the first Newton stage crawl or diverge.
  z[p.ri()] = implied_min_rate(p, z) - std::max(1e-6, 0.5 * options.barrier_mu0);

  Slacks s, s_trial;
  if (!eval_slacks(p, z, s)) {
    throw NumericalError("subproblem start not strictly feasible at " +
                         first_violation(p, z));
  }

  SubproblemSolution sol;
  sol.m_count = spec.M;

  Eigen::VectorXd grad(p.n_z), grad_trial(p.n_z), dz(p.n_z), z_trial(p.n_z);
  Eigen::MatrixXd hess(p.n_z, p.n_z);
  Eigen::LLT<Eigen::MatrixXd> llt;
  const bool debug_stages = std::getenv("SKYCOMP_SOLVER_DEBUG") != nullptr;
  const bool debug_newton = std::getenv("SKYCOMP_NEWTON_DEBUG") != nullptr;

  double mu = options.barrier_mu0;
  double mu_last = mu;
  int total_newton = 0;
  int stages = 0;
  bool stage_converged = false;
  for (;;) {
    ++stages;
    mu_last = mu;
    stage_converged = false;
    double best_grad = std::numeric_limits<double>::infinity();
    int fallback_stall = 0;
    recenter_epigraph(p, z, s, mu);
    for (int it = 0; it < options.max_newton_per_stage; ++it) {
      assemble(p, z, s, mu, grad, hess);
      const double grad_norm = grad.lpNorm<Eigen::Infinity>();
      if (grad_norm <= options.newton_tol) {
        stage_converged = true;
        break;
      }
      // Small mu puts the exact stage optimum below double-precision
      // resolution: once steps are only accepted through the gradient
      // fallback and the norm has stopped improving, take the point.
      if (grad_norm < 0.9 * best_grad) {
        best_grad = grad_norm;
        fallback_stall = 0;
      }
      if (fallback_stall >= 8 && grad_norm <= 1e-6) break;
      ++total_newton;

      llt.compute(hess);
      if (llt.info() != Eigen::Success) {
        double ridge = 1e-12 * std::max(hess.diagonal().maxCoeff(), 1.0);
        bool ok = false;
        for (int attempt = 0; attempt < 8; ++attempt) {
          hess.diagonal().array() += ridge;
          llt.compute(hess);
          if (llt.info() == Eigen::Success) {
            ok = true;
            break;
          }
          ridge *= 100.0;
        }
        if (!ok) {
          throw NumericalError("barrier Hessian factorization failed");
        }
      }
      dz = llt.solve(-grad);
      double slope = grad.dot(dz);
      if (!(slope < 0.0)) {
        dz = -grad;
        slope = -grad.squaredNorm();
      }

      const double phi0 = barrier_value(p, z, s, mu);
      double t = 1.0;
      int accepted = 0;  // 0 none, 1 Armijo, 2 gradient fallback
      while (t >= 1e-14) {
        z_trial = z + t * dz;
        if (eval_slacks(p, z_trial, s_trial) &&
            min_slack_ratio(s_trial, s) >= 0.01) {
          const double phi1 = barrier_value(p, z_trial, s_trial, mu);
          if (phi1 <= phi0 + options.armijo_slope * t * slope) {
            z.swap(z_trial);
            std::swap(s, s_trial);
            recenter_epigraph(p, z, s, mu);
            accepted = 1;
            break;
          }
          // Near the stage optimum the barrier value moves by less than
          // double-precision resolution; fall back to gradient decrease.
          if (t >= 0.125 &&
              phi1 <= phi0 + 1e-12 * std::max(1.0, std::abs(phi0))) {
            gradient_only(p, z_trial, s_trial, mu, grad_trial);
            if (grad_trial.lpNorm<Eigen::Infinity>() <= 0.9 * grad_norm) {
              z.swap(z_trial);
              std::swap(s, s_trial);
              recenter_epigraph(p, z, s, mu);
              accepted = 2;
              break;
            }
          }
        }
        t *= options.backtrack;
      }
      if (debug_newton) {
        std::fprintf(stderr,
                     "      it=%d mu=%.1e grad=%.3e slope=%.3e t=%.3e acc=%d "
                     "phi=%.12e sdist=%.2e srate=%.2e sblo=%.2e sbhi=%.2e "
                     "sdisp=%.2e\n",
                     it, mu, grad_norm, slope, t, accepted, phi0,
                     s.dist.minCoeff(), s.rate.minCoeff(),
                     s.box_lo.minCoeff(), s.box_hi.minCoeff(),
                     s.disp.size() > 0 ? s.disp.minCoeff() : 1.0);
      }
      if (accepted == 0) break;  // line search stagnated at this stage
      // An Armijo acceptance whose predicted decrease is below the
      // floating-point resolution of phi is noise, not progress.
      const bool measurable =
          options.armijo_slope * t * (-slope) >
          1e-13 * std::max(1.0, std::abs(phi0));
      fallback_stall =
          (accepted == 2 || !measurable) ? fallback_stall + 1 : 0;
      if (fallback_stall >= 40) break;
    }
    if (debug_stages) {
      assemble(p, z, s, mu, grad, hess);
      std::fprintf(stderr,
                   "    stage mu=%.1e newton_total=%d grad=%.3e conv=%d\n",
                   mu, total_newton, grad.lpNorm<Eigen::Infinity>(),
                   stage_converged ? 1 : 0);
    }
    if (mu <= options.barrier_mu_final * (1.0 + 1e-9)) break;
    mu = std::max(mu * options.barrier_shrink, options.barrier_mu_final);
  }

  sol.newton_iterations = total_newton;
  sol.barrier_stages = stages;
  sol.converged = stage_converged;

  assemble(p, z, s, mu_last, grad, hess);
  const double stationarity = grad.lpNorm<Eigen::Infinity>();
  if (stationarity > 1e-6) {
    throw NumericalError("subproblem solve did not reach stationarity (" +
                         std::to_string(stationarity) + ")");
  }

  sol.x.resize(static_cast<size_t>(spec.M) * spec.N);
  sol.y.resize(sol.x.size());
  for (int n = 0; n < p.N; ++n) {
    for (int m = 0; m < p.M; ++m) {
      const size_t grid = static_cast<size_t>(n) * p.M + m;
      const int slot = p.slot_of[grid];
      sol.x[grid] = (slot >= 0 ? z[p.xi(slot)] : p.fixed_x[grid]) * p.S;
      sol.y[grid] = (slot >= 0 ? z[p.yi(slot)] : p.fixed_y[grid]) * p.S;
    }
  }
  sol.c.resize(p.n_c);
  for (int i = 0; i < p.n_c; ++i) sol.c[i] = z[p.ui(i)] / (p.S * p.S);
  sol.rate = z[p.ri()];

  const double s2 = p.S * p.S;
  sol.dual_rate.resize(static_cast<size_t>(p.K) * p.L);
  for (int ug = 0; ug < p.K * p.L; ++ug) {
    sol.dual_rate[ug] = mu_last / s.rate[ug];
  }
  sol.dual_distance.resize(p.n_c);
  for (int i = 0; i < p.n_c; ++i) {
    sol.dual_distance[i] = mu_last / s.dist[i] / s2;
  }
  sol.dual_displacement.assign(spec.disp_budget.size(), 0.0);
  for (size_t d = 0; d < p.disp.size(); ++d) {
    sol.dual_displacement[p.disp[d].spec_index] =
        mu_last / s.disp[static_cast<Eigen::Index>(d)] / s2;
  }

  sol.kkt.stationarity = stationarity;  // objective gradient norm is 1
  sol.kkt.primal = 0.0;                 // iterates stay strictly interior
  sol.kkt.dual = 0.0;                   // barrier duals are positive
  sol.kkt.complementarity = mu_last;
  sol.barrier_mu_final = mu_last;

  if (options.dump && !options.dump_path.empty()) {
    dump_json(spec, sol, options.dump_path);
  }
  return sol;
}

ScaResult run_sca(const EpisodeTracks& tracks, const ScenarioConfig& config,
                  SolveMode mode, const UavTracks& init,
                  const ScaOptions& options) {
  BuildOptions bo;
  bo.episode = options.episode;
  bo.anchor = options.anchor;
  bo.init = &init;
  bo.allow_large = options.allow_large;

  SubproblemSpec spec = build_subproblem(tracks, config, {}, mode, bo);

  ScaResult result;
  {
    ScaIterate start;
    start.tracks.M = spec.M;
    start.tracks.N = spec.N;
    start.tracks.x = expand_positions_x(spec);
    start.tracks.y = expand_positions_y(spec);
    start.rate = bound_objective_at(spec, start.tracks.x, start.tracks.y);
    start.c_tight =
        tight_c_from_positions(spec, start.tracks.x, start.tracks.y);
    start.spec = spec;
    result.trace.push_back(std::move(start));
  }

  UavTracks current;
  current.M = spec.M;
  current.N = spec.N;
  current.x = result.trace.front().tracks.x;
  current.y = result.trace.front().tracks.y;

  for (int q = 1; q <= options.max_outer; ++q) {
    SolverOptions so = options.solver;
    if (q > 1) so.barrier_mu0 = options.warm_mu0;
    if (so.dump && !so.dump_path.empty()) {
      so.dump_path += "_q" + std::to_string(q) + ".json";
    }

    SubproblemSolution sol = solve_convex_subproblem(spec, so);
    ++result.solves;
    const double rate_new = bound_objective_at(spec, sol.x, sol.y);
    const double rate_prev = result.trace.back().rate;

    if (rate_new < rate_prev - 1e-6) {
      throw NumericalError("SCA monotonicity breach beyond tolerance");
    }
    if (rate_new <= rate_prev) break;  // no certified progress; discard

    ScaIterate it;
    it.rate = rate_new;
    it.tracks.M = spec.M;
    it.tracks.N = spec.N;
    it.tracks.x = sol.x;
    it.tracks.y = sol.y;
    it.c_tight = tight_c_from_positions(spec, sol.x, sol.y);
    it.solution = std::move(sol);
    it.spec = spec;
    it.has_solution = true;
    const double gain = rate_new - rate_prev;
    result.trace.push_back(std::move(it));

    if (gain <= options.epsilon) break;

    current.x = result.trace.back().tracks.x;
    current.y = result.trace.back().tracks.y;
    bo.init = &current;
    spec =
        build_subproblem(tracks, config, result.trace.back().c_tight, mode, bo);
  }
  return result;
}

WeightedAverageReport verify_weighted_average(const SubproblemSolution& sol,
                                              const SubproblemSpec& spec) {
  const Normalized p = normalize(spec);
  const size_t grid_size = static_cast<size_t>(spec.M) * spec.N;

  std::vector<double> sum_lambda(p.n_slots, 0.0);
  std::vector<double> num_x(p.n_slots, 0.0), num_y(p.n_slots, 0.0);
  for (int l = 0; l < spec.L; ++l) {
    for (int k = 0; k < spec.K; ++k) {
      for (int n = 0; n < spec.N; ++n) {
        const size_t uidx = (static_cast<size_t>(n) * spec.L + l) * spec.K + k;
        for (int m = 0; m < spec.M; ++m) {
          const int slot = p.slot_of[static_cast<size_t>(n) * spec.M + m];
          if (slot < 0) continue;
          const double lam = sol.dual_distance[spec.c_index(k, l, m, n)];
          sum_lambda[slot] += lam;
          num_x[slot] += lam * spec.user_a[uidx];
          num_y[slot] += lam * spec.user_b[uidx];
        }
      }
    }
  }
  std::vector<double> sum_beta(p.n_slots, 0.0);
  for (const DispPair& d : p.disp) {
    const double beta = sol.dual_displacement[d.spec_index];
    const double bx =
        d.slot_b >= 0 ? slot_pos_x(sol, p, d.slot_b) : d.fx * p.S;
    const double by =
        d.slot_b >= 0 ? slot_pos_y(sol, p, d.slot_b) : d.fy * p.S;
    sum_beta[d.slot_a] += beta;
    num_x[d.slot_a] += beta * bx;
    num_y[d.slot_a] += beta * by;
    if (d.slot_b >= 0) {
      const double ax = slot_pos_x(sol, p, d.slot_a);
      const double ay = slot_pos_y(sol, p, d.slot_a);
      sum_beta[d.slot_b] += beta;
      num_x[d.slot_b] += beta * ax;
      num_y[d.slot_b] += beta * ay;
    }
  }

  // Blocks whose duals sit at the barrier noise floor carry no position
  // information; report them as indeterminate rather than failed.
  const double noise = 100.0 * spec.K * spec.L * spec.N *
                       sol.barrier_mu_final /
                       (spec.length_scale * spec.length_scale);

  WeightedAverageReport rep;
  rep.residual_x.assign(grid_size, 0.0);
  rep.residual_y.assign(grid_size, 0.0);
  rep.indeterminate.assign(grid_size, false);
  for (int n = 0; n < spec.N; ++n) {
    for (int m = 0; m < spec.M; ++m) {
      const size_t grid = static_cast<size_t>(n) * spec.M + m;
      const int slot = p.slot_of[grid];
      if (slot < 0) {
        rep.indeterminate[grid] = true;
        continue;
      }
      const double denom = sum_lambda[slot] + sum_beta[slot];
      if (denom <= noise) {
        rep.indeterminate[grid] = true;
        continue;
      }
      rep.residual_x[grid] = std::abs(sol.x[grid] - num_x[slot] / denom);
      rep.residual_y[grid] = std::abs(sol.y[grid] - num_y[slot] / denom);
      rep.max_residual = std::max(
          {rep.max_residual, rep.residual_x[grid], rep.residual_y[grid]});
      ++rep.determinate_count;
    }
  }
  return rep;
}

}  // namespace skycomp
