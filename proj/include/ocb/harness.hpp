#pragma once

// Experiment orchestration: run configuration, single transports, sweeps over
// t_f and U0, method comparison, and result files.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ocb/error.hpp"
#include "ocb/esta.hpp"
#include "ocb/scales.hpp"
#include "ocb/tdse.hpp"
#include "ocb/trajectory.hpp"

namespace ocb {

inline constexpr const char* kCodeVersion = "0.1.0";

struct SolverSettings {
  GridSpec grid{};
  double dt_tauz = 1.0 / 400.0;
  GroundStateOptions ground{};
};

struct T099Settings {
  double threshold = 0.99;
  double resolution_tauz = 0.02;
  int max_bisections = 8;
};

struct RunConfig {
  SystemParams params{};
  PathKind method = PathKind::STA;
  int cutoff_N = 2;
  GKRoute route = GKRoute::Approx;
  SolverSettings solver{};
  std::vector<double> tf_values;  // tau_z, strictly increasing
  std::vector<double> u0_values;  // E_R, strictly increasing
  std::optional<std::array<double, 6>> epsilon_override;  // l_z
  T099Settings t099{};
  std::string out_dir = ".";
  int workers = 0;  // 0: hardware concurrency
};

inline void require_increasing(const std::vector<double>& v, const char* name) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw ConfigError(std::string(name) + " must be strictly increasing");
  for (double x : v)
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string(name) + " must be positive");
}

inline void validate(const RunConfig& c) {
  validate(c.params);
  require_increasing(c.tf_values, "tf_values");
  require_increasing(c.u0_values, "u0_values");
  if (c.method == PathKind::eSTA && c.cutoff_N < 1 && !c.epsilon_override)
    throw ConfigError("eSTA requires cutoff_N >= 1");
  if (c.cutoff_N < 0) throw ConfigError("cutoff_N must be non-negative");
  if (c.workers < 0) throw ConfigError("workers must be non-negative");
  if (!(c.solver.dt_tauz > 0.0) || c.solver.dt_tauz > 1.0 / 200.0 + 1e-15)
    throw ConfigError("dt_tauz must be positive and at most 1/200");
  if (!(c.t099.resolution_tauz > 0.0)) throw ConfigError("t099 resolution must be positive");
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["params"] = {{"depth_U0", c.params.depth_U0},
                 {"distance_d", c.params.distance_d},
                 {"final_time_tf", c.params.final_time_tf},
                 {"waist_x_w0", c.params.waist_x_w0},
                 {"waist_y_w0", c.params.waist_y_w0}};
  j["method"] = std::string(to_string(c.method));
  j["cutoff_N"] = c.cutoff_N;
  j["gk_route"] = c.route == GKRoute::Approx ? "approx" : "exact";
  j["grid"] = {c.solver.grid.nx, c.solver.grid.ny, c.solver.grid.nz};
  j["spans"] = {c.solver.grid.span_x, c.solver.grid.span_y, c.solver.grid.span_z};
  j["dt_tauz"] = c.solver.dt_tauz;
  j["tf_values"] = c.tf_values;
  j["u0_values"] = c.u0_values;
  if (c.epsilon_override) j["epsilon_lz"] = *c.epsilon_override;
  j["t099"] = {{"threshold", c.t099.threshold},
               {"resolution_tauz", c.t099.resolution_tauz},
               {"max_bisections", c.t099.max_bisections}};
  j["out_dir"] = c.out_dir;
  j["workers"] = c.workers;
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {"params",   "method",    "cutoff_N",   "gk_route", "grid",
                                                 "spans",    "dt_tauz",   "tf_values",  "u0_values", "epsilon_lz",
                                                 "t099",     "out_dir",   "workers"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key: " + key);
  RunConfig c;
  try {
    if (j.contains("params")) {
      const auto& p = j.at("params");
      for (const auto& [key, value] : p.items()) {
        if (key == "depth_U0") c.params.depth_U0 = value.get<double>();
        else if (key == "distance_d") c.params.distance_d = value.get<double>();
        else if (key == "final_time_tf") c.params.final_time_tf = value.get<double>();
        else if (key == "waist_x_w0") c.params.waist_x_w0 = value.get<double>();
        else if (key == "waist_y_w0") c.params.waist_y_w0 = value.get<double>();
        else throw ConfigError("unknown params key: " + key);
      }
    }
    if (j.contains("method")) c.method = parse_path_kind(j.at("method").get<std::string>());
    if (j.contains("cutoff_N")) c.cutoff_N = j.at("cutoff_N").get<int>();
    if (j.contains("gk_route")) {
      const auto r = j.at("gk_route").get<std::string>();
      if (r != "approx" && r != "exact") throw ConfigError("gk_route must be approx or exact");
      c.route = r == "approx" ? GKRoute::Approx : GKRoute::Exact;
    }
    if (j.contains("grid")) {
      const auto g = j.at("grid").get<std::vector<int>>();
      if (g.size() != 3) throw ConfigError("grid must have three entries");
      c.solver.grid.nx = g[0];
      c.solver.grid.ny = g[1];
      c.solver.grid.nz = g[2];
    }
    if (j.contains("spans")) {
      const auto s = j.at("spans").get<std::vector<double>>();
      if (s.size() != 3) throw ConfigError("spans must have three entries");
      c.solver.grid.span_x = s[0];
      c.solver.grid.span_y = s[1];
      c.solver.grid.span_z = s[2];
    }
    if (j.contains("dt_tauz")) c.solver.dt_tauz = j.at("dt_tauz").get<double>();
    if (j.contains("tf_values")) c.tf_values = j.at("tf_values").get<std::vector<double>>();
    if (j.contains("u0_values")) c.u0_values = j.at("u0_values").get<std::vector<double>>();
    if (j.contains("epsilon_lz")) {
      const auto e = j.at("epsilon_lz").get<std::vector<double>>();
      if (e.size() != 6) throw ConfigError("epsilon_lz must have six entries");
      std::array<double, 6> a{};
      std::copy(e.begin(), e.end(), a.begin());
      c.epsilon_override = a;
    }
    if (j.contains("t099")) {
      const auto& t = j.at("t099");
      c.t099.threshold = t.value("threshold", c.t099.threshold);
      c.t099.resolution_tauz = t.value("resolution_tauz", c.t099.resolution_tauz);
      c.t099.max_bisections = t.value("max_bisections", c.t099.max_bisections);
    }
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Records

struct FidelityRecord {
  std::string method;
  double U0_ER = 0, d_lz = 0, wx_lz = 0, wy_lz = 0, tf_tauz = 0;
  double fidelity = 0;
  double max_atom_accel_over_amax = 0;
  int grid_nx = 0, grid_ny = 0, grid_nz = 0;
  double dt_tauz = 0;
  double runtime_seconds = 0;
  std::string code_version = kCodeVersion;
};

inline const char* kRecordHeader =
    "method,U0_ER,d_lz,wx_lz,wy_lz,tf_tauz,fidelity,max_atom_accel_over_amax,grid_nx,grid_ny,grid_nz,dt_tauz,"
    "runtime_seconds,code_version";

inline std::string to_csv_row(const FidelityRecord& r) {
  std::ostringstream os;
  os << std::setprecision(12) << r.method << ',' << r.U0_ER << ',' << r.d_lz << ',' << r.wx_lz << ',' << r.wy_lz
     << ',' << r.tf_tauz << ',' << r.fidelity << ',' << r.max_atom_accel_over_amax << ',' << r.grid_nx << ','
     << r.grid_ny << ',' << r.grid_nz << ',' << r.dt_tauz << ',' << std::setprecision(4) << r.runtime_seconds << ','
     << r.code_version;
  return os.str();
}

inline nlohmann::json to_json(const FidelityRecord& r) {
  return {{"method", r.method},
          {"U0_ER", r.U0_ER},
          {"d_lz", r.d_lz},
          {"wx_lz", r.wx_lz},
          {"wy_lz", r.wy_lz},
          {"tf_tauz", r.tf_tauz},
          {"fidelity", r.fidelity},
          {"max_atom_accel_over_amax", r.max_atom_accel_over_amax},
          {"grid", {r.grid_nx, r.grid_ny, r.grid_nz}},
          {"dt_tauz", r.dt_tauz},
          {"runtime_seconds", r.runtime_seconds},
          {"code_version", r.code_version}};
}

// ---------------------------------------------------------------------------
// Transport

/// Ground state and propagator inputs shared by all runs with the same depth,
/// waists and grid (t_f and d only enter the path).
class TransportSession {
 public:
  TransportSession(const SystemParams& params, const SolverSettings& solver)
      : params_(params), solver_(solver), scales_(derive_scales(params)) {
    grid_ = std::make_shared<const Grid3>(solver.grid, scales_);
    potential_ = sample_potential(*grid_, scales_, PotentialModel::Full);
    auto gs = ground_state(single_well_potential(*grid_, scales_), harmonic_trial(grid_, scales_), scales_,
                           solver.ground);
    ground_energy_ = energy_expectation(gs.psi, potential_);
    ground_steps_ = gs.steps;
    ground_boundary_ = gs.boundary_probability;
    ground_ = std::make_unique<WaveField>(std::move(gs.psi));
  }

  const DerivedScales& scales() const { return scales_; }
  const SystemParams& params() const { return params_; }
  const Grid3& grid() const { return *grid_; }
  const WaveField& ground() const { return *ground_; }
  const PotentialArray& potential() const { return potential_; }
  double ground_energy() const { return ground_energy_; }
  int ground_steps() const { return ground_steps_; }
  double ground_boundary_probability() const { return ground_boundary_; }

  DerivedScales scales_for(double tf_tauz) const {
    SystemParams p = params_;
    p.final_time_tf = tf_tauz;
    return derive_scales(p);
  }

  TrapPath make_path(double tf_tauz, PathKind method, int cutoff, GKRoute route = GKRoute::Approx,
                     const std::optional<std::array<double, 6>>& epsilon_lz = std::nullopt) const {
    const auto s = scales_for(tf_tauz);
    switch (method) {
      case PathKind::STA:
        return sta_path(s);
      case PathKind::Sine:
        return sine_path(s);
      case PathKind::Triangle:
        return triangle_path(s);
      case PathKind::eSTA: {
        std::array<double, 6> eps{};
        if (epsilon_lz) {
          for (int j = 0; j < 6; ++j) eps[j] = (*epsilon_lz)[j] * s.l_z;
        } else {
          eps = compute_epsilon(s, cutoff, route).epsilon;
        }
        return esta_path(s, eps);
      }
    }
    throw ConfigError("unknown method");
  }

  struct Outcome {
    FidelityRecord record;
    PropagationResult propagation;
  };

  Outcome run(double tf_tauz, const TrapPath& path, const PropagationOptions& popt = {}) const {
    const auto start = std::chrono::steady_clock::now();
    const auto s = scales_for(tf_tauz);
    // Large correction coefficients cancel at t_f, so the check scales with them.
    double v_scale = s.distance;
    if (path.has_classical_path()) {
      const auto& c = path.polynomial().coefficients();
      for (std::size_t n = 1; n < c.size(); ++n) v_scale = std::max(v_scale, static_cast<double>(n) * std::abs(c[n]));
    }
    if (std::abs(path.velocity(s.final_time)) > 1e-9 * v_scale / s.final_time)
      throw SolverError("trap path does not come to rest at t_f");
    const int nt = static_cast<int>(std::ceil(s.final_time / (solver_.dt_tauz * s.tau_z) - 1e-9));
    const double dt = s.final_time / nt;
    ComovingPropagator prop(potential_, grid_, dt);
    WaveField psi = *ground_;
    Outcome out;
    try {
      out.propagation = propagate(psi, prop, [&path](double t) { return path.velocity(t); }, 0.0, nt, &potential_, popt);
    } catch (const SolverError& e) {
      throw SolverError(std::string(e.what()) + " [" + std::string(to_string(path.kind())) +
                        ", U0=" + std::to_string(params_.depth_U0) + ", tf=" + std::to_string(tf_tauz) + "]");
    }
    auto& r = out.record;
    r.method = std::string(to_string(path.kind()));
    r.U0_ER = params_.depth_U0;
    r.d_lz = params_.distance_d;
    r.wx_lz = params_.waist_x_w0;
    r.wy_lz = params_.waist_y_w0;
    r.tf_tauz = tf_tauz;
    r.fidelity = fidelity(psi, *ground_);
    r.max_atom_accel_over_amax = max_atom_acceleration(path) / s.a_max;
    r.grid_nx = grid_->nx();
    r.grid_ny = grid_->ny();
    r.grid_nz = grid_->nz();
    r.dt_tauz = dt / s.tau_z;
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

  FidelityRecord run(double tf_tauz, PathKind method, int cutoff = 2, GKRoute route = GKRoute::Approx,
                     const std::optional<std::array<double, 6>>& epsilon_lz = std::nullopt) const {
    return run(tf_tauz, make_path(tf_tauz, method, cutoff, route, epsilon_lz)).record;
  }

 private:
  SystemParams params_;
  SolverSettings solver_;
  DerivedScales scales_;
  std::shared_ptr<const Grid3> grid_;
  PotentialArray potential_;
  std::unique_ptr<WaveField> ground_;
  double ground_energy_ = 0.0;
  int ground_steps_ = 0;
  double ground_boundary_ = 0.0;
};

inline FidelityRecord run_transport(const RunConfig& config) {
  validate(config);
  TransportSession session(config.params, config.solver);
  return session.run(config.params.final_time_tf, config.method, config.cutoff_N, config.route,
                     config.epsilon_override);
}

/// Applies fn to 0..n-1 on a bounded pool; results keep index order. The
/// first exception is rethrown after all workers stop.
template <class Fn>
auto parallel_map(std::size_t n, int workers, const Fn& fn) {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int count = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(workers > 0 ? workers : hw)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < count; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::vector<FidelityRecord> sweep_tf(const TransportSession& session, PathKind method,
                                            const std::vector<double>& tf_values, int cutoff = 2, int workers = 0,
                                            GKRoute route = GKRoute::Approx) {
  if (tf_values.empty()) throw ConfigError("sweep needs at least one t_f value");
  require_increasing(tf_values, "tf_values");
  return parallel_map(tf_values.size(), workers,
                      [&](std::size_t i) { return session.run(tf_values[i], method, cutoff, route); });
}

inline std::vector<FidelityRecord> sweep_tf(const RunConfig& config) {
  validate(config);
  TransportSession session(config.params, config.solver);
  return sweep_tf(session, config.method, config.tf_values, config.cutoff_N, config.workers, config.route);
}

// ---------------------------------------------------------------------------
// t_0.99

struct T099Row {
  double U0_ER = 0;
  double t099_tauz = 0;  // upper end of the final bracket
  double lower_tauz = 0;  // largest t_f observed below threshold (0 if none)
  bool censored = false;
  std::string note;
  int runs = 0;
};

struct T099Result {
  std::vector<T099Row> rows;
  std::vector<FidelityRecord> records;
  bool any_censored() const {
    return std::any_of(rows.begin(), rows.end(), [](const T099Row& r) { return r.censored; });
  }
};

/// Coarse sweep, then bisection between the largest failing t_f and the next
/// passing sample. The reported value is always a passing t_f above every
/// failing one.
inline T099Row locate_t099(const TransportSession& session, PathKind method, const std::vector<double>& coarse,
                           const T099Settings& opt, int cutoff, int workers, std::vector<FidelityRecord>& records) {
  T099Row row;
  row.U0_ER = session.params().depth_U0;
  auto sampled = sweep_tf(session, method, coarse, cutoff, workers);
  records.insert(records.end(), sampled.begin(), sampled.end());
  row.runs = static_cast<int>(sampled.size());
  int last_fail = -1;
  for (int i = 0; i < static_cast<int>(sampled.size()); ++i)
    if (sampled[i].fidelity < opt.threshold) last_fail = i;
  if (last_fail == static_cast<int>(sampled.size()) - 1) {
    row.censored = true;
    row.lower_tauz = coarse.back();
    row.t099_tauz = std::numeric_limits<double>::quiet_NaN();
    row.note = "threshold not reached within the sweep range";
    return row;
  }
  if (last_fail < 0) {
    row.censored = true;
    row.t099_tauz = coarse.front();
    row.note = "threshold already met at the smallest t_f";
    return row;
  }
  double lo = coarse[last_fail], hi = coarse[last_fail + 1];
  for (int k = 0; k < opt.max_bisections && hi - lo > opt.resolution_tauz; ++k) {
    const double mid = 0.5 * (lo + hi);
    auto r = session.run(mid, method, cutoff);
    records.push_back(r);
    ++row.runs;
    (r.fidelity < opt.threshold ? lo : hi) = mid;
  }
  row.lower_tauz = lo;
  row.t099_tauz = hi;
  return row;
}

inline T099Result sweep_t099(const RunConfig& config) {
  validate(config);
  if (config.u0_values.empty() || config.tf_values.empty()) throw ConfigError("t099 needs u0_values and tf_values");
  T099Result res;
  for (double u0 : config.u0_values) {
    SystemParams p = config.params;
    p.depth_U0 = u0;
    TransportSession session(p, config.solver);
    res.rows.push_back(
        locate_t099(session, config.method, config.tf_values, config.t099, config.cutoff_N, config.workers, res.records));
  }
  return res;
}

inline std::vector<FidelityRecord> compare_methods(const RunConfig& config) {
  validate(config);
  TransportSession session(config.params, config.solver);
  std::vector<FidelityRecord> out;
  for (PathKind m : {PathKind::Triangle, PathKind::Sine, PathKind::STA, PathKind::eSTA}) {
    auto r = sweep_tf(session, m, config.tf_values, config.cutoff_N, config.workers, config.route);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collapse analysis on (t_f, F) samples sorted by t_f

struct CurvePoint {
  double tf = 0, fidelity = 0;
};

inline std::vector<CurvePoint> curve_of(const std::vector<FidelityRecord>& records, const std::string& method) {
  std::vector<CurvePoint> c;
  for (const auto& r : records)
    if (r.method == method) c.push_back({r.tf_tauz, r.fidelity});
  std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) { return a.tf < b.tf; });
  return c;
}

namespace detail {
inline double crossing(const CurvePoint& lo, const CurvePoint& hi, double level) {
  if (hi.fidelity == lo.fidelity) return hi.tf;
  const double f = (level - lo.fidelity) / (hi.fidelity - lo.fidelity);
  return lo.tf + std::clamp(f, 0.0, 1.0) * (hi.tf - lo.tf);
}
}  // namespace detail

/// First sample below `level` scanning downward from the longest t_f; the
/// crossing is interpolated towards the next longer sample. NaN if none.
inline double collapse_scanning_down(const std::vector<CurvePoint>& c, double level = 0.5) {
  for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i)
    if (c[i].fidelity < level)
      return i + 1 < static_cast<int>(c.size()) ? detail::crossing(c[i], c[i + 1], level) : c[i].tf;
  return std::numeric_limits<double>::quiet_NaN();
}

/// Upper edge of the run of samples below `level` that starts at the shortest
/// t_f: the point where fidelity stops recovering. Dips further up are
/// oscillations, not breakdown. NaN if the shortest sample is above `level`.
inline double complete_breakdown(const std::vector<CurvePoint>& c, double level = 0.5) {
  if (c.empty() || c.front().fidelity >= level) return std::numeric_limits<double>::quiet_NaN();
  std::size_t i = 0;
  while (i + 1 < c.size() && c[i + 1].fidelity < level) ++i;
  return i + 1 < c.size() ? detail::crossing(c[i], c[i + 1], level) : c[i].tf;
}

// ---------------------------------------------------------------------------
// Output

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string records_csv(const std::vector<FidelityRecord>& records) {
  std::string s = std::string(kRecordHeader) + "\n";
  for (const auto& r : records) s += to_csv_row(r) + "\n";
  return s;
}

/// Writes <stem>.csv and <stem>.json (config echo, records, content hash) to
/// dir. Returns the hash.
inline std::string emit(const std::vector<FidelityRecord>& records, const RunConfig& config, const std::string& dir,
                        const std::string& stem, const nlohmann::json& extra = nlohmann::json::object()) {
  std::filesystem::create_directories(dir);
  const std::string csv = records_csv(records);
  nlohmann::json j;
  j["config"] = to_json(config);
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) j["records"].push_back(to_json(r));
  if (!extra.empty()) j["summary"] = extra;
  j["code_version"] = kCodeVersion;
  std::ostringstream hs;
  hs << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j["config"].dump() + csv);
  j["content_hash"] = hs.str();
  const auto base = std::filesystem::path(dir) / stem;
  std::ofstream(base.string() + ".csv") << csv;
  std::ofstream(base.string() + ".json") << j.dump(2) << '\n';
  return hs.str();
}

}  // namespace ocb
