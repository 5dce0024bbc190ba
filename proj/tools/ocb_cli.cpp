// Command-line front end: path design, overlap integrals, ground states,
// single transports, t_f sweeps, t_0.99 search and method comparison.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ocb/ocb.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string grid;
  std::optional<double> dt_tauz;
  std::string method;
  std::optional<int> cutoff;
  std::string route;
  std::optional<double> U0, d, tf, wx, wy;
  std::vector<double> tf_values, u0_values;
  std::optional<int> workers;
  int samples = 201;
  std::string checkpoint;
  int trace_every = 0;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--grid", o.grid, "grid points NX,NY,NZ");
  cmd->add_option("--dt-tauz", o.dt_tauz, "time step in tau_z (at most 1/200)");
  cmd->add_option("--method", o.method, "sta | esta | sine | triangle");
  cmd->add_option("--cutoff", o.cutoff, "eSTA mode cutoff N");
  cmd->add_option("--route", o.route, "G/K evaluation: approx | exact");
  cmd->add_option("--U0", o.U0, "lattice depth [E_R]");
  cmd->add_option("--d", o.d, "transport distance [l_z]");
  cmd->add_option("--tf", o.tf, "transport time [tau_z]");
  cmd->add_option("--wx", o.wx, "waist along x [l_z]");
  cmd->add_option("--wy", o.wy, "waist along y [l_z]");
  cmd->add_option("--tf-values", o.tf_values, "t_f sweep values [tau_z]")->delimiter(',');
  cmd->add_option("--u0-values", o.u0_values, "U0 sweep values [E_R]")->delimiter(',');
  cmd->add_option("--workers", o.workers, "worker threads (0: all cores)");
}

ocb::RunConfig build_config(const Options& o) {
  ocb::RunConfig c = o.config_path.empty() ? ocb::RunConfig{} : ocb::load_config(o.config_path);
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  if (!o.grid.empty()) {
    std::vector<int> g;
    std::stringstream ss(o.grid);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        g.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ocb::ConfigError("--grid expects NX,NY,NZ");
      }
    }
    if (g.size() != 3) throw ocb::ConfigError("--grid expects NX,NY,NZ");
    c.solver.grid.nx = g[0];
    c.solver.grid.ny = g[1];
    c.solver.grid.nz = g[2];
  }
  if (o.dt_tauz) c.solver.dt_tauz = *o.dt_tauz;
  if (!o.method.empty()) c.method = ocb::parse_path_kind(o.method);
  if (o.cutoff) c.cutoff_N = *o.cutoff;
  if (!o.route.empty()) {
    if (o.route != "approx" && o.route != "exact") throw ocb::ConfigError("--route must be approx or exact");
    c.route = o.route == "approx" ? ocb::GKRoute::Approx : ocb::GKRoute::Exact;
  }
  if (o.U0) c.params.depth_U0 = *o.U0;
  if (o.d) c.params.distance_d = *o.d;
  if (o.tf) c.params.final_time_tf = *o.tf;
  if (o.wx) c.params.waist_x_w0 = *o.wx;
  if (o.wy) c.params.waist_y_w0 = *o.wy;
  if (!o.tf_values.empty()) c.tf_values = o.tf_values;
  if (!o.u0_values.empty()) c.u0_values = o.u0_values;
  if (o.workers) c.workers = *o.workers;
  ocb::validate(c);
  return c;
}

ocb::TrapPath design_path(const ocb::RunConfig& c, const ocb::DerivedScales& s) {
  switch (c.method) {
    case ocb::PathKind::STA:
      return ocb::sta_path(s);
    case ocb::PathKind::Sine:
      return ocb::sine_path(s);
    case ocb::PathKind::Triangle:
      return ocb::triangle_path(s);
    case ocb::PathKind::eSTA:
      break;
  }
  std::array<double, 6> eps{};
  if (c.epsilon_override) {
    for (int j = 0; j < 6; ++j) eps[j] = (*c.epsilon_override)[j] * s.l_z;
  } else {
    eps = ocb::compute_epsilon(s, c.cutoff_N, c.route).epsilon;
  }
  return ocb::esta_path(s, eps);
}

int cmd_design(const ocb::RunConfig& c, int samples) {
  const auto s = ocb::derive_scales(c.params);
  const auto path = design_path(c, s);
  const double lz = s.l_z, tz = s.tau_z;
  std::printf("t_tauz,q0_lz,q0dot_lz_per_tauz,q0ddot_lz_per_tauz2,qc_lz\n");
  const int n = std::max(2, samples);
  for (int i = 0; i < n; ++i) {
    const double t = s.final_time * i / (n - 1);
    const double qc = path.has_classical_path() ? path.classical_position(t) : path.position(t);
    std::printf("%.10g,%.12g,%.12g,%.12g,%.12g\n", t / tz, path.position(t) / lz, path.velocity(t) * tz / lz,
                path.acceleration(t) * tz * tz / lz, qc / lz);
  }
  return 0;
}

int cmd_gk(const ocb::RunConfig& c) {
  const auto s = ocb::derive_scales(c.params);
  const auto cv = ocb::compute_epsilon(s, std::max(1, c.cutoff_N), c.route);
  std::printf("route = %s\n", c.route == ocb::GKRoute::Approx ? "approx" : "exact");
  std::printf("cutoff_N = %d\n", cv.cutoff_N);
  for (const auto& m : cv.modes) {
    std::printf("mode %s |G| = %.10e\n", ocb::to_string(m.mode).c_str(), std::abs(m.g));
    for (int j = 0; j < 6; ++j)
      std::printf("mode %s K%d = %.10e %+.10ei\n", ocb::to_string(m.mode).c_str(), j + 1, m.k[j].real(),
                  m.k[j].imag());
  }
  std::printf("sum_G2 = %.10e\n", cv.g_norm_squared);
  std::printf("fidelity_estimate = %.10f\n", cv.fidelity_estimate);
  std::printf("epsilon_lz =");
  for (double e : cv.epsilon) std::printf(" %.10e", e / s.l_z);
  std::printf("\n");
  if (cv.degenerate) std::printf("warning = %s\n", cv.warning.c_str());
  std::printf("seconds = %.3f\n", cv.seconds);
  return 0;
}

int cmd_groundstate(const ocb::RunConfig& c, const std::string& checkpoint) {
  ocb::TransportSession session(c.params, c.solver);
  std::printf("energy_ER = %.10f\n", session.ground_energy());
  std::printf("steps = %d\n", session.ground_steps());
  std::printf("boundary_probability = %.3e\n", session.ground_boundary_probability());
  if (!checkpoint.empty()) ocb::write_checkpoint(session.ground(), checkpoint);
  return 0;
}

int cmd_transport(const ocb::RunConfig& c, int trace_every) {
  ocb::TransportSession session(c.params, c.solver);
  const double tf = c.params.final_time_tf;
  const auto path = session.make_path(tf, c.method, c.cutoff_N, c.route, c.epsilon_override);
  ocb::PropagationOptions popt;
  popt.observe_every = trace_every;
  const auto outcome = session.run(tf, path, popt);
  std::printf("%s\n%s\n", ocb::kRecordHeader, ocb::to_csv_row(outcome.record).c_str());
  if (outcome.propagation.boundary_exceeded)
    std::fprintf(stderr, "note: probability reached the window edge (max %.2e)\n",
                 outcome.propagation.max_boundary_probability);
  ocb::emit({outcome.record}, c, c.out_dir, "transport");
  if (trace_every > 0) {
    const auto s = session.scales_for(tf);
    std::ofstream((std::filesystem::path(c.out_dir) / "trace.csv").string())
        << ocb::trace_csv(outcome.propagation.trace, s.tau_z, s.l_z);
  }
  return 0;
}

int cmd_sweep(const ocb::RunConfig& c) {
  const auto records = ocb::sweep_tf(c);
  std::fputs(ocb::records_csv(records).c_str(), stdout);
  const auto curve = ocb::curve_of(records, std::string(ocb::to_string(c.method)));
  nlohmann::json summary = {{"collapse_scanning_down_tauz", ocb::collapse_scanning_down(curve)},
                            {"complete_breakdown_tauz", ocb::complete_breakdown(curve)}};
  ocb::emit(records, c, c.out_dir, "sweep", summary);
  return 0;
}

int cmd_t099(const ocb::RunConfig& c) {
  const auto result = ocb::sweep_t099(c);
  nlohmann::json rows = nlohmann::json::array();
  std::printf("U0_ER,t099_tauz,lower_tauz,censored,runs\n");
  for (const auto& r : result.rows) {
    std::printf("%.6g,%.6g,%.6g,%d,%d\n", r.U0_ER, r.t099_tauz, r.lower_tauz, r.censored ? 1 : 0, r.runs);
    rows.push_back({{"U0_ER", r.U0_ER},
                    {"t099_tauz", r.censored && std::isnan(r.t099_tauz) ? nlohmann::json() : nlohmann::json(r.t099_tauz)},
                    {"lower_tauz", r.lower_tauz},
                    {"censored", r.censored},
                    {"note", r.note},
                    {"runs", r.runs}});
  }
  ocb::emit(result.records, c, c.out_dir, "t099", {{"t099", rows}});
  return result.any_censored() ? 2 : 0;
}

int cmd_compare(const ocb::RunConfig& c) {
  const auto records = ocb::compare_methods(c);
  std::fputs(ocb::records_csv(records).c_str(), stdout);
  nlohmann::json summary;
  for (const char* m : {"triangle", "sine", "STA", "eSTA"}) {
    const auto curve = ocb::curve_of(records, m);
    summary[m] = {{"complete_breakdown_tauz", ocb::complete_breakdown(curve)},
                  {"collapse_scanning_down_tauz", ocb::collapse_scanning_down(curve)}};
  }
  ocb::emit(records, c, c.out_dir, "compare", summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical conveyor-belt transport: STA/eSTA design and 3D verification"};
  app.require_subcommand(1);
  Options o;
  auto* design = app.add_subcommand("design", "trap path and classical atom path as CSV");
  auto* gk = app.add_subcommand("gk", "per-mode G and K integrals and the eSTA correction");
  auto* groundstate = app.add_subcommand("groundstate", "ground state of the displaced lattice well");
  auto* transport = app.add_subcommand("transport", "single 3D transport run");
  auto* sweep = app.add_subcommand("sweep", "fidelity versus t_f");
  auto* t099 = app.add_subcommand("t099", "t_0.99 versus U0 (coarse sweep plus bisection)");
  auto* compare = app.add_subcommand("compare", "all four methods on a common t_f grid");
  for (auto* cmd : {design, gk, groundstate, transport, sweep, t099, compare}) add_common(cmd, o);
  design->add_option("--samples", o.samples, "number of time samples");
  groundstate->add_option("--checkpoint", o.checkpoint, "write the ground state to this file");
  transport->add_option("--trace-every", o.trace_every, "write norm/<z> trace every N steps");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = build_config(o);
    if (*design) return cmd_design(config, o.samples);
    if (*gk) return cmd_gk(config);
    if (*groundstate) return cmd_groundstate(config, o.checkpoint);
    if (*transport) return cmd_transport(config, o.trace_every);
    if (*sweep) return cmd_sweep(config);
    if (*t099) return cmd_t099(config);
    if (*compare) return cmd_compare(config);
  } catch (const ocb::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
