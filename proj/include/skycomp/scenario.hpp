#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "skycomp/errors.hpp"

namespace skycomp {

struct Arena {
  double xmin = 0.0;
  double xmax = 0.0;
  double ymin = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double diagonal() const;
  bool contains(double x, double y, double tol = 1e-9) const;
};

double dbm_to_watts(double dbm);
double db_to_linear(double db);

// Physical and algorithmic constants for one scenario.  dB/dBm values are
// converted to linear units once, in finalize(); everything downstream works
// in watts and plain ratios.
struct ScenarioConfig {
  int num_uavs = 0;        // M
  int users_per_group = 0; // K
  int num_groups = 0;      // L
  int num_episodes = 0;    // N
  double episode_duration_s = 0.0;
  double altitude_m = 0.0;
  double tx_power_dbm = 0.0;
  double noise_psd_dbm_hz = 0.0;
  double bandwidth_hz = 0.0;
  double ref_gain_db = 0.0;
  double uav_speed_max_mps = 0.0;
  double user_speed_mps = 0.0;
  Arena arena;
  std::uint64_t seed = 0;

  // Derived, cached by finalize().
  double tx_power_w = 0.0;
  double noise_power_w = 0.0;       // sigma^2 = psd(linear) * bandwidth
  double ref_gain = 0.0;            // tau0, linear power ratio at 1 m
  double displacement_budget_m = 0.0;

  int total_users() const { return users_per_group * num_groups; }

  // Validates invariants and computes the derived fields.  Throws
  // ConfigError on violation.
  void finalize();

  static ScenarioConfig from_json_text(const std::string& text);
  static ScenarioConfig from_json_file(const std::string& path);

  // Stable textual dump of the raw fields, used for provenance hashing.
  std::string canonical_string() const;
};

// Nominal user positions, indexed (k, l, n); stored flat.
struct UserTracks {
  int K = 0, L = 0, N = 0;
  std::vector<double> a;  // x-coordinates
  std::vector<double> b;  // y-coordinates

  int idx(int k, int l, int n) const { return (n * L + l) * K + k; }
  double ax(int k, int l, int n) const { return a[idx(k, l, n)]; }
  double by(int k, int l, int n) const { return b[idx(k, l, n)]; }
  bool empty() const { return a.empty(); }
};

// Nominal UAV positions, indexed (m, n); stored flat.
struct UavTracks {
  int M = 0, N = 0;
  std::vector<double> x;
  std::vector<double> y;

  int idx(int m, int n) const { return n * M + m; }
  double px(int m, int n) const { return x[idx(m, n)]; }
  double py(int m, int n) const { return y[idx(m, n)]; }
  bool empty() const { return x.empty(); }

  // Same horizontal position replicated over all N episodes.
  static UavTracks constant(int M, int N, const std::vector<double>& xs,
                            const std::vector<double>& ys);
};

struct EpisodeTracks {
  UserTracks users;
  UavTracks uavs;
};

// Eq.-style 3D link distance from a UAV at altitude H above (x, y) to a
// ground user at (a, b).  Total function; >= H always.
double link_distance(double uav_x, double uav_y, double user_a, double user_b,
                     double altitude);

// Per-episode maximum horizontal displacement, uav_speed_max * duration.
double displacement_budget(const ScenarioConfig& config);

// Random-waypoint-style mobility: i.i.d. uniform initial drop, then constant
// speed steps in uniformly random directions with specular reflection at the
// arena boundary.  Deterministic in config.seed.
UserTracks generate_user_tracks(const ScenarioConfig& config);

// Throws ConfigError if the tracks violate the arena or per-step
// displacement invariants.
void check_user_tracks(const UserTracks& tracks, const ScenarioConfig& config);

// M x K matrix of link distances for one (group, episode) pair.
Eigen::MatrixXd group_distance_matrix(const EpisodeTracks& tracks,
                                      const ScenarioConfig& config, int group,
                                      int episode);

// Distances from user (k, l) at episode n to each of the M UAVs.
Eigen::VectorXd user_distances(const EpisodeTracks& tracks,
                               const ScenarioConfig& config, int k, int l,
                               int n);

}  // namespace skycomp
