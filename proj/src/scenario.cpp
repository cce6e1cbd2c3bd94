#include "skycomp/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skycomp/rng.hpp"

namespace skycomp {

double Arena::diagonal() const { return std::hypot(width(), height()); }

bool Arena::contains(double x, double y, double tol) const {
  return x >= xmin - tol && x <= xmax + tol && y >= ymin - tol &&
         y <= ymax + tol;
}

double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

void ScenarioConfig::finalize() {
  if (num_uavs < 1 || users_per_group < 1 || num_groups < 1) {
    throw ConfigError("m, k, l must all be >= 1");
  }
  if (users_per_group >= num_uavs) {
    throw ConfigError("users per group K must satisfy K < M");
  }
  if (num_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  if (episode_duration_s <= 0.0) {
    throw ConfigError("episode_duration_s must be > 0");
  }
  if (altitude_m < 0.0) throw ConfigError("altitude_m must be >= 0");
  if (bandwidth_hz <= 0.0) throw ConfigError("bandwidth_hz must be > 0");
  if (uav_speed_max_mps < 0.0 || user_speed_mps < 0.0) {
    throw ConfigError("speeds must be >= 0");
  }
  if (arena.width() <= 0.0 || arena.height() <= 0.0) {
    throw ConfigError("arena must have positive width and height");
  }
  if (arena.diagonal() > 5e5) {
    throw ConfigError("arena larger than supported (diagonal > 500 km)");
  }

  tx_power_w = dbm_to_watts(tx_power_dbm);
  noise_power_w = dbm_to_watts(noise_psd_dbm_hz) * bandwidth_hz;
  ref_gain = db_to_linear(ref_gain_db);
  displacement_budget_m = uav_speed_max_mps * episode_duration_s;

  if (tx_power_w <= 0.0 || noise_power_w <= 0.0 || ref_gain <= 0.0) {
    throw ConfigError("powers and reference gain must be strictly positive");
  }
}

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config JSON parse failure: ") + e.what());
  }

  ScenarioConfig cfg;
  try {
    cfg.num_uavs = j.at("m").get<int>();
    cfg.users_per_group = j.at("k").get<int>();
    cfg.num_groups = j.at("l").get<int>();
    cfg.num_episodes = j.at("n_episodes").get<int>();
    cfg.episode_duration_s = j.at("episode_duration_s").get<double>();
    cfg.altitude_m = j.at("altitude_m").get<double>();
    cfg.tx_power_dbm = j.at("tx_power_dbm").get<double>();
    cfg.noise_psd_dbm_hz = j.at("noise_psd_dbm_hz").get<double>();
    cfg.bandwidth_hz = j.at("bandwidth_hz").get<double>();
    cfg.ref_gain_db = j.at("ref_gain_db").get<double>();
    cfg.uav_speed_max_mps = j.at("uav_speed_max_mps").get<double>();
    cfg.user_speed_mps = j.at("user_speed_mps").get<double>();
    const auto& box = j.at("arena_m");
    if (!box.is_array() || box.size() != 4) {
      throw ConfigError("arena_m must be [xmin, xmax, ymin, ymax]");
    }
    cfg.arena = Arena{box[0].get<double>(), box[1].get<double>(),
                      box[2].get<double>(), box[3].get<double>()};
    cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config JSON field error: ") + e.what());
  }

  static const std::vector<std::string> known = {
      "m",          "k",
      "l",          "n_episodes",
      "episode_duration_s", "altitude_m",
      "tx_power_dbm",       "noise_psd_dbm_hz",
      "bandwidth_hz",       "ref_gain_db",
      "uav_speed_max_mps",  "user_speed_mps",
      "arena_m",            "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& kk : known) ok = ok || (kk == it.key());
    if (!ok) throw ConfigError("unknown config key: " + it.key());
  }

  cfg.finalize();
  return cfg;
}

ScenarioConfig ScenarioConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ScenarioConfig::canonical_string() const {
  char buf[640];
  std::snprintf(buf, sizeof(buf),
                "m=%d k=%d l=%d n=%d dt=%.17g H=%.17g P=%.17g npsd=%.17g "
                "bw=%.17g tau0=%.17g vuav=%.17g vuser=%.17g "
                "arena=%.17g,%.17g,%.17g,%.17g seed=%llu",
                num_uavs, users_per_group, num_groups, num_episodes,
                episode_duration_s, altitude_m, tx_power_dbm, noise_psd_dbm_hz,
                bandwidth_hz, ref_gain_db, uav_speed_max_mps, user_speed_mps,
                arena.xmin, arena.xmax, arena.ymin, arena.ymax,
                static_cast<unsigned long long>(seed));
  return std::string(buf);
}

UavTracks UavTracks::constant(int M, int N, const std::vector<double>& xs,
                              const std::vector<double>& ys) {
  UavTracks t;
  t.M = M;
  t.N = N;
  t.x.resize(static_cast<size_t>(M) * N);
  t.y.resize(static_cast<size_t>(M) * N);
  for (int n = 0; n < N; ++n) {
    for (int m = 0; m < M; ++m) {
      t.x[t.idx(m, n)] = xs[m];
      t.y[t.idx(m, n)] = ys[m];
    }
  }
  return t;
}

double link_distance(double uav_x, double uav_y, double user_a, double user_b,
                     double altitude) {
  const double dx = uav_x - user_a;
  const double dy = uav_y - user_b;
  return std::sqrt(dx * dx + dy * dy + altitude * altitude);
}

double displacement_budget(const ScenarioConfig& config) {
  return config.uav_speed_max_mps * config.episode_duration_s;
}

namespace {

// Reflects p into [lo, hi] by unfolding (triangle wave).  Preserves path
// length of the underlying straight-line motion.
double reflect_into(double p, double lo, double hi) {
  const double span = hi - lo;
  double q = std::fmod(p - lo, 2.0 * span);
  if (q < 0.0) q += 2.0 * span;
  return (q <= span) ? lo + q : hi - (q - span);
}

}  // namespace

UserTracks generate_user_tracks(const ScenarioConfig& config) {
  const int K = config.users_per_group;
  const int L = config.num_groups;
  const int N = config.num_episodes;
  const double step = config.user_speed_mps * config.episode_duration_s;
  const Arena& ar = config.arena;

  if (step > std::min(ar.width(), ar.height())) {
    throw ConfigError("arena too small for one user step");
  }

  UserTracks tracks;
  tracks.K = K;
  tracks.L = L;
  tracks.N = N;
  tracks.a.resize(static_cast<size_t>(K) * L * N);
  tracks.b.resize(static_cast<size_t>(K) * L * N);

  // One substream per physical user (global index), so regrouping the same
  // population into a different L leaves every trajectory untouched.
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const std::uint64_t user_id = static_cast<std::uint64_t>(l) * K + k;
      PhiloxRng rng(config.seed,
                    make_stream(StreamPurpose::UserTracks, 0, 0, user_id));
      double x = rng.uniform(ar.xmin, ar.xmax);
      double y = rng.uniform(ar.ymin, ar.ymax);
      tracks.a[tracks.idx(k, l, 0)] = x;
      tracks.b[tracks.idx(k, l, 0)] = y;
      for (int n = 1; n < N; ++n) {
        const double theta = rng.angle();
        x = reflect_into(x + step * std::cos(theta), ar.xmin, ar.xmax);
        y = reflect_into(y + step * std::sin(theta), ar.ymin, ar.ymax);
        tracks.a[tracks.idx(k, l, n)] = x;
        tracks.b[tracks.idx(k, l, n)] = y;
      }
    }
  }
  return tracks;
}

void check_user_tracks(const UserTracks& tracks,
                       const ScenarioConfig& config) {
  const double step =
      config.user_speed_mps * config.episode_duration_s + 1e-9;
  for (int n = 0; n < tracks.N; ++n) {
    for (int l = 0; l < tracks.L; ++l) {
      for (int k = 0; k < tracks.K; ++k) {
        const double x = tracks.ax(k, l, n);
        const double y = tracks.by(k, l, n);
        if (!config.arena.contains(x, y)) {
          throw ConfigError("user position outside arena");
        }
        if (n > 0) {
          const double dx = x - tracks.ax(k, l, n - 1);
          const double dy = y - tracks.by(k, l, n - 1);
          if (std::hypot(dx, dy) > step) {
            throw ConfigError("user displacement exceeds speed budget");
          }
        }
      }
    }
  }
}

Eigen::MatrixXd group_distance_matrix(const EpisodeTracks& tracks,
                                      const ScenarioConfig& config, int group,
                                      int episode) {
  const int M = config.num_uavs;
  const int K = config.users_per_group;
  Eigen::MatrixXd d(M, K);
  for (int k = 0; k < K; ++k) {
    const double a = tracks.users.ax(k, group, episode);
    const double b = tracks.users.by(k, group, episode);
    for (int m = 0; m < M; ++m) {
      d(m, k) = link_distance(tracks.uavs.px(m, episode),
                              tracks.uavs.py(m, episode), a, b,
                              config.altitude_m);
    }
  }
  return d;
}

Eigen::VectorXd user_distances(const EpisodeTracks& tracks,
                               const ScenarioConfig& config, int k, int l,
                               int n) {
  const int M = config.num_uavs;
  Eigen::VectorXd d(M);
  const double a = tracks.users.ax(k, l, n);
  const double b = tracks.users.by(k, l, n);
  for (int m = 0; m < M; ++m) {
    d(m) = link_distance(tracks.uavs.px(m, n), tracks.uavs.py(m, n), a, b,
                         config.altitude_m);
  }
  return d;
}

}  // namespace skycomp
