#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "ocb/mathkit.hpp"
#include "ocb/tdse.hpp"
#include "ocb/trajectory.hpp"

using namespace ocb;

namespace {

DerivedScales scales(double u0 = 100.0, double tf = 3.0, double d = 85.0) {
  SystemParams p;
  p.depth_U0 = u0;
  p.final_time_tf = tf;
  p.distance_d = d;
  return derive_scales(p);
}

std::shared_ptr<const Grid3> grid(const DerivedScales& s, int nx, int ny, int nz, double span_z = 0.0) {
  GridSpec g;
  g.nx = nx;
  g.ny = ny;
  g.nz = nz;
  g.span_z = span_z;
  return std::make_shared<const Grid3>(g, s);
}

double distance(const WaveField& a, const WaveField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s * a.grid().cell_volume());
}

// Harmonic-oscillator eigenstate n = 0 or 1 along z on a 1D grid.
WaveField ho_state(std::shared_ptr<const Grid3> g, const DerivedScales& s, int n) {
  WaveField psi(std::move(g));
  const double a = kMass * s.omega_z / (2.0 * kHbar);
  psi.fill([&](double, double, double z) { return cplx((n == 0 ? 1.0 : z) * std::exp(-a * z * z)); });
  psi.normalize();
  return psi;
}

}  // namespace

TEST(Grid, AxesAndWavenumbers) {
  const auto s = scales();
  const auto g = grid(s, 8, 16, 64);
  for (int a = 0; a < 3; ++a) {
    const auto& ax = g->axis(a);
    EXPECT_NEAR(ax.spacing * ax.n, 2.0 * ax.half_width, 1e-12 * ax.half_width);
    EXPECT_DOUBLE_EQ(ax.k[0], 0.0);
    EXPECT_GT(ax.k[ax.n / 2 - 1], 0.0);
    EXPECT_NEAR(ax.k[ax.n / 2], -std::numbers::pi / ax.spacing, 1e-12);  // Nyquist
    EXPECT_NEAR(ax.k[1], 2.0 * std::numbers::pi / (ax.n * ax.spacing), 1e-12);
  }
  EXPECT_NEAR(g->axis(0).half_width, 8.0 * s.l_x, 1e-9 * s.l_x);
  EXPECT_NEAR(g->axis(2).half_width, 2.0 * std::numbers::pi, 1e-12);
  EXPECT_THROW(grid(s, 12, 16, 64), ConfigError);
  EXPECT_THROW(grid(s, 8, 8, 64, 5.0), ConfigError);  // narrower than 4 periods
}

TEST(WaveFieldOps, FidelityExamples) {
  const auto s = scales();
  const auto g = grid(s, 1, 1, 256);
  const auto p0 = ho_state(g, s, 0), p1 = ho_state(g, s, 1);
  EXPECT_NEAR(fidelity(p0, p0), 1.0, 1e-12);
  EXPECT_NEAR(fidelity(p1, p0), 0.0, 1e-20);
  WaveField mix(g);
  for (std::size_t i = 0; i < mix.data().size(); ++i) mix[i] = std::sqrt(0.9) * p0[i] + cplx(0.0, std::sqrt(0.1)) * p1[i];
  EXPECT_NEAR(mix.norm(), 1.0, 1e-12);
  EXPECT_NEAR(fidelity(mix, p0), 0.9, 1e-12);
  const auto other = grid(s, 1, 1, 128);
  EXPECT_THROW(fidelity(WaveField(other), p0), ConfigError);
}

TEST(Energy, HarmonicEigenstatesAndPlaneWave) {
  const auto s = scales();
  const auto g = grid(s, 1, 1, 512);
  const auto v = sample_potential(*g, s, PotentialModel::Harmonic);
  const auto p0 = ho_state(g, s, 0);
  const auto parts = energy_parts(p0, v);
  EXPECT_NEAR(parts.total(), -s.depth + 0.5 * kHbar * s.omega_z, 1e-8);
  // Virial theorem: <T> = <V - V(0)>.
  EXPECT_NEAR(parts.kinetic, parts.potential + s.depth, 1e-6);
  const auto p1 = ho_state(g, s, 1);
  EXPECT_NEAR(energy_expectation(p1, v), -s.depth + 1.5 * kHbar * s.omega_z, 1e-8);

  WaveField wave(g);
  const double k0 = g->axis(2).k[5];
  wave.fill([&](double, double, double z) { return std::exp(cplx(0.0, k0 * z)); });
  wave.normalize();
  EXPECT_NEAR(energy_expectation(wave, PotentialArray(g->size(), 0.0)), kHbar * kHbar * k0 * k0 / (2.0 * kMass), 1e-9);
}

TEST(GroundState, HarmonicTrapEnergy3D) {
  const auto s = scales();
  const auto g = grid(s, 32, 32, 128);
  const auto v = sample_potential(*g, s, PotentialModel::Harmonic);
  const auto gs = ground_state(v, harmonic_trial(g, s, 0.3), s);
  const double zero_point = 0.5 * kHbar * (s.omega_x + s.omega_y + s.omega_z);
  EXPECT_NEAR((gs.energy + s.depth) / zero_point, 1.0, 5e-3);
  EXPECT_LT(gs.boundary_probability, 1e-8);
  EXPECT_NEAR(gs.psi.norm(), 1.0, 1e-12);
}

TEST(GroundState, LatticeBelowHarmonicAndResolved) {
  const auto s = scales();
  const auto g1 = grid(s, 32, 32, 128), g2 = grid(s, 32, 32, 256);
  const auto e1 = ground_state(single_well_potential(*g1, s), harmonic_trial(g1, s), s);
  const auto e2 = ground_state(single_well_potential(*g2, s), harmonic_trial(g2, s), s);
  const double harmonic = -s.depth + 0.5 * kHbar * (s.omega_x + s.omega_y + s.omega_z);
  EXPECT_LT(e1.energy, harmonic);
  EXPECT_LT(std::abs(e1.energy - e2.energy) / std::abs(e2.energy), 1e-4);
  // The well-restricted state is also stationary in the full lattice.
  const auto full = sample_potential(*g1, s, PotentialModel::Full);
  EXPECT_NEAR(energy_expectation(e1.psi, full), e1.energy, 1e-6 * std::abs(e1.energy));
}

TEST(GroundState, RejectsTooSmallWindow) {
  const auto s = scales();
  GridSpec spec;
  spec.nx = 16;
  spec.ny = 16;
  spec.nz = 64;
  spec.span_x = 2.0;
  const auto g = std::make_shared<const Grid3>(spec, s);
  EXPECT_THROW(ground_state(single_well_potential(*g, s), harmonic_trial(g, s), s), SolverError);
}

TEST(Propagation, FreeGaussianSpreading) {
  const auto s = scales();
  const auto g = grid(s, 1, 1, 1024, 60.0);
  const double sigma0 = 0.3;
  WaveField psi(g);
  psi.fill([&](double, double, double z) { return cplx(std::exp(-z * z / (4.0 * sigma0 * sigma0))); });
  psi.normalize();
  const PotentialArray v(g->size(), 0.0);
  const double dt = 0.002;
  ComovingPropagator prop(v, g, dt);
  const int nt = 50;
  for (int n = 0; n < nt; ++n) prop.step(psi, 0.0);
  const double t = nt * dt;
  double m2 = 0.0;
  const auto& z = g->axis(2).x;
  for (int l = 0; l < g->nz(); ++l) m2 += std::norm(psi[l]) * z[l] * z[l];
  m2 *= g->cell_volume();
  const double tau = kHbar * t / (2.0 * kMass * sigma0 * sigma0);
  const double expect = sigma0 * std::sqrt(1.0 + tau * tau);
  EXPECT_NEAR(std::sqrt(m2), expect, 1e-6 * expect);
}

TEST(Propagation, StaticGroundStateAndNormDrift) {
  const auto s = scales();
  const auto g = grid(s, 1, 1, 128);
  const auto v = sample_potential(*g, s, PotentialModel::Full);
  const auto gs = ground_state(single_well_potential(*g, s), harmonic_trial(g, s), s);
  WaveField psi = gs.psi;
  ComovingPropagator prop(v, g, s.tau_z / 400.0);
  const auto r = propagate(psi, prop, [](double) { return 0.0; }, 0.0, 1000);
  EXPECT_EQ(r.steps, 1000);
  EXPECT_LT(std::abs(r.final_norm - 1.0), 1e-10);
  // The single-well state is not an exact eigenstate of the periodic lattice;
  // tunnelling to neighbouring wells is negligible over 1000 steps.
  EXPECT_GT(fidelity(psi, gs.psi), 1.0 - 1e-8);
}

TEST(Propagation, HarmonicStaticEigenstate) {
  const auto s = scales();
  const auto g = grid(s, 1, 1, 256);
  const auto v = sample_potential(*g, s, PotentialModel::Harmonic);
  const auto gs = ground_state(v, harmonic_trial(g, s), s);
  WaveField psi = gs.psi;
  ComovingPropagator prop(v, g, s.tau_z / 400.0);
  propagate(psi, prop, [](double) { return 0.0; }, 0.0, 1000);
  EXPECT_GT(fidelity(psi, gs.psi), 1.0 - 1e-10);
}

TEST(Propagation, CoherentStateOscillation) {
  const auto s = scales();
  const auto g = grid(s, 1, 1, 512);
  const auto v = sample_potential(*g, s, PotentialModel::Harmonic);
  const double z0 = 0.5 * s.l_z;
  WaveField psi = harmonic_trial(g, s, z0);
  const int nt = 1600;
  ComovingPropagator prop(v, g, s.tau_z / nt);
  PropagationOptions opt;
  opt.observe_every = 40;
  const auto r = propagate(psi, prop, [](double) { return 0.0; }, 0.0, nt, &v, opt);
  ASSERT_EQ(r.trace.size(), 41u);
  for (const auto& o : r.trace) EXPECT_NEAR(o.mean_z, z0 * std::cos(s.omega_z * o.t), 1e-4 * z0) << o.t;
}

TEST(Propagation, TimeReversalStaticTrap) {
  const auto s = scales();
  const auto g = grid(s, 1, 1, 128);
  const auto v = sample_potential(*g, s, PotentialModel::Full);
  WaveField start = harmonic_trial(g, s, 0.2);
  WaveField psi = start;
  ComovingPropagator fwd(v, g, s.tau_z / 400.0), back(v, g, -s.tau_z / 400.0);
  for (int n = 0; n < 800; ++n) fwd.step(psi, 0.0);
  EXPECT_LT(fidelity(psi, start), 0.999);
  for (int n = 0; n < 800; ++n) back.step(psi, 0.0);
  EXPECT_GT(fidelity(psi, start), 1.0 - 1e-8);
}

TEST(Propagation, HarmonicStaTransportIsExact) {
  // In a harmonic trap the STA path returns the ground state for any t_f.
  const auto s = scales(100.0, 1.0, 20.0);
  const auto g = grid(s, 1, 1, 256);
  const auto v = sample_potential(*g, s, PotentialModel::Harmonic);
  const auto gs = ground_state(v, harmonic_trial(g, s), s);
  const auto path = sta_path(s);
  WaveField psi = gs.psi;
  const int nt = 1600;
  ComovingPropagator prop(v, g, s.final_time / nt);
  propagate(psi, prop, [&](double t) { return path.velocity(t); }, 0.0, nt);
  EXPECT_GT(fidelity(psi, gs.psi), 1.0 - 1e-6);
}

TEST(Propagation, SineTransportMatchesForcedOscillator) {
  // Harmonic trap, sine velocity profile: the final fidelity is the coherent
  // state overlap exp(-|A|^2 / (4 omega)) with A = int a(t) e^{i omega t} dt
  // (recoil units, m = 1/2).
  const auto s = scales(100.0, 1.3, 20.0);
  const auto g = grid(s, 1, 1, 256);
  const auto v = sample_potential(*g, s, PotentialModel::Harmonic);
  const auto gs = ground_state(v, harmonic_trial(g, s), s);
  const auto path = sine_path(s);
  WaveField psi = gs.psi;
  const int nt = 3200;
  ComovingPropagator prop(v, g, s.final_time / nt);
  propagate(psi, prop, [&](double t) { return path.velocity(t); }, 0.0, nt);
  const auto a = quad1d([&](double t) { return path.acceleration(t) * std::exp(cplx(0.0, s.omega_z * t)); }, 0.0,
                        s.final_time, {1e-13, 1e-12});
  const double expect = std::exp(-std::norm(a.value) / (4.0 * s.omega_z * kHbar) * (2.0 * kMass));
  EXPECT_NEAR(fidelity(psi, gs.psi), expect, 1e-4);
  EXPECT_LT(expect, 0.99);
}

TEST(Propagation, SecondOrderConvergence) {
  const auto s = scales(100.0, 1.5, 10.0);
  const auto g = grid(s, 1, 1, 128);
  const auto v = sample_potential(*g, s, PotentialModel::Full);
  const auto gs = ground_state(single_well_potential(*g, s), harmonic_trial(g, s), s);
  const auto path = sta_path(s);
  auto run = [&](int nt) {
    WaveField psi = gs.psi;
    ComovingPropagator prop(v, g, s.final_time / nt);
    propagate(psi, prop, [&](double t) { return path.velocity(t); }, 0.0, nt);
    return psi;
  };
  const int n0 = 300;
  const auto ref = run(8 * n0);
  const double e1 = distance(run(n0), ref), e2 = distance(run(2 * n0), ref);
  EXPECT_NEAR(e1 / e2, 4.0, 0.5);
}

TEST(Propagation, DetectsNonFiniteState) {
  const auto s = scales();
  const auto g = grid(s, 1, 1, 64);
  const auto v = sample_potential(*g, s, PotentialModel::Full);
  WaveField psi = harmonic_trial(g, s);
  psi[3] = cplx(std::nan(""), 0.0);
  ComovingPropagator prop(v, g, s.tau_z / 400.0);
  EXPECT_THROW(propagate(psi, prop, [](double) { return 0.0; }, 0.0, 100), SolverError);
  EXPECT_THROW(ComovingPropagator(v, g, 0.0), ConfigError);
}

TEST(Propagation, TraceCsv) {
  std::vector<Observation> trace = {{0.0, 1.0, 0.5, -3.0}, {2.0, 1.0, 0.25, -3.0}};
  const auto csv = trace_csv(trace, 2.0, 0.5);
  EXPECT_EQ(csv.substr(0, 15), "t,norm,mean_z,E");
  EXPECT_NE(csv.find("\n1,1,0.5,-3\n"), std::string::npos);
}

TEST(Checkpoint, RoundTrip) {
  const auto s = scales();
  const auto g = grid(s, 4, 4, 64);
  WaveField psi = harmonic_trial(g, s, 0.1);
  psi[7] = cplx(0.25, -0.5);
  const auto path = (std::filesystem::temp_directory_path() / "ocb_checkpoint_test.bin").string();
  write_checkpoint(psi, path);
  WaveField back(g);
  const auto h = read_checkpoint(back, path);
  EXPECT_EQ(h.version, kCheckpointVersion);
  EXPECT_EQ(h.nz, 64);
  EXPECT_DOUBLE_EQ(h.spacing[2], g->axis(2).spacing);
  for (std::size_t i = 0; i < psi.data().size(); ++i) EXPECT_EQ(back[i], psi[i]);
  WaveField wrong(grid(s, 4, 4, 128));
  EXPECT_THROW(read_checkpoint(wrong, path), ConfigError);
  std::filesystem::remove(path);
}
