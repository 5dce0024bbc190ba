#pragma once

// eSTA correction of an STA path. G_n is the overlap of the Hamiltonian
// difference (full lattice minus harmonic trap) between transport mode n and
// the transported ground state, integrated over the transport; K_n is its
// gradient with respect to the six path-node controls.
//
// Two routes are provided: closed forms with frozen beam waists (fast), and
// direct quadrature over the longitudinal coordinate with the exact
// z-dependent waists (oracle).

#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "ocb/error.hpp"
#include "ocb/mathkit.hpp"
#include "ocb/potential.hpp"
#include "ocb/scales.hpp"
#include "ocb/trajectory.hpp"

namespace ocb {

struct ModeIndex {
  int nx = 0, ny = 0, nz = 0;
  int order() const { return nx + ny + nz; }
  bool transverse_parity_zero() const { return nx % 2 != 0 || ny % 2 != 0; }
  friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
};

inline std::string to_string(const ModeIndex& m) {
  return "(" + std::to_string(m.nx) + "," + std::to_string(m.ny) + "," + std::to_string(m.nz) + ")";
}

/// Modes with 1 <= n <= N and even transverse indices (the others vanish).
inline std::vector<ModeIndex> modes_up_to(int cutoff) {
  if (cutoff < 1) throw ConfigError("cutoff N must be >= 1");
  std::vector<ModeIndex> out;
  for (int n = 1; n <= cutoff; ++n)
    for (int nx = 0; nx <= n; nx += 2)
      for (int ny = 0; nx + ny <= n; ny += 2) out.push_back({nx, ny, n - nx - ny});
  return out;
}

/// Paths entering the overlaps: the trap path q0 that is evaluated, and the
/// STA design whose classical path q_c carries the transport modes.
struct EstaContext {
  DerivedScales scales;
  TrapPath trap;
  TrapPath design;
  bool harmonic_lattice = false;  // replace the lattice by its harmonic expansion

  static EstaContext sta(const DerivedScales& s) { return {s, sta_path(s), sta_path(s), false}; }
};

// ---------------------------------------------------------------------------
// Building blocks

/// int X^p exp(-a X^2) dX over the real line.
inline double even_moment(int p, double a) {
  if (p % 2 != 0) return 0.0;
  return gamma_half(p / 2) / std::pow(a, p / 2 + 0.5);
}

/// int H_n(X) exp(-(1 + beta) X^2) dX.
inline double transverse_overlap(int n, double beta) {
  double s = 0.0;
  for (const auto& t : partition_terms(n)) s += t.coefficient * std::pow(2.0, t.k1) * even_moment(t.k1, 1.0 + beta);
  return s;
}

/// int X^2 H_n(X) exp(-(1 + beta) X^2) dX.
inline double transverse_second_moment(int n, double beta) {
  double s = 0.0;
  for (const auto& t : partition_terms(n))
    s += t.coefficient * std::pow(2.0, t.k1) * even_moment(t.k1 + 2, 1.0 + beta);
  return s;
}

inline double mode_normalization(const ModeIndex& m) {
  return 1.0 / std::sqrt(std::pow(2.0, m.order()) * factorial(m.nx) * factorial(m.ny) * factorial(m.nz) *
                         std::pow(std::numbers::pi, 3));
}

inline double mode_frequency(const ModeIndex& m, const DerivedScales& s) {
  return m.nx * s.omega_x + m.ny * s.omega_y + m.nz * s.omega_z;
}

namespace detail {

// sum over lambda of C(l, 2 lambda) Gamma(lambda + 1/2) x^{l - 2 lambda}
inline cplx shifted_moment_sum(int l, cplx x) {
  cplx s = 0.0;
  for (int lam = 0; 2 * lam <= l; ++lam) s += binomial(l, 2 * lam) * gamma_half(lam) * std::pow(x, l - 2 * lam);
  return s;
}

}  // namespace detail

/// D(l): 4 * int Z^l exp(-(Z - c)^2) cos^2(k z') dZ with z' = sqrt2 l_z Z - q0,
/// c = q_c / (sqrt2 l_z) and delta = q_c - q0.
inline cplx d_function(int l, double c, double delta, double k_lz) {
  if (l < 0) throw ConfigError("d_function: negative order");
  const double damp = std::exp(-2.0 * k_lz * k_lz);
  const cplx shift(0.0, std::numbers::sqrt2 * k_lz);
  const cplx phase = std::exp(cplx(0.0, 2.0 * kWavenumber * delta));
  return 2.0 * detail::shifted_moment_sum(l, c) +
         damp * (phase * detail::shifted_moment_sum(l, c + shift) +
                 std::conj(phase) * detail::shifted_moment_sum(l, c - shift));
}

/// S(l): 2i * int Z^l exp(-(Z - c)^2) sin(2 k z') dZ.
inline cplx d_function_sine(int l, double c, double delta, double k_lz) {
  if (l < 0) throw ConfigError("d_function_sine: negative order");
  const double damp = std::exp(-2.0 * k_lz * k_lz);
  const cplx shift(0.0, std::numbers::sqrt2 * k_lz);
  const cplx phase = std::exp(cplx(0.0, 2.0 * kWavenumber * delta));
  return damp * (phase * detail::shifted_moment_sum(l, c + shift) -
                 std::conj(phase) * detail::shifted_moment_sum(l, c - shift));
}

inline cplx d_function(int l, double t, const EstaContext& ctx) {
  const double lz2 = std::numbers::sqrt2 * ctx.scales.l_z;
  const double qc = ctx.design.classical_position(t);
  return d_function(l, qc / lz2, qc - ctx.trap.position(t), ctx.scales.k_lz);
}

namespace detail {

// Longitudinal integrals int H_n(zeta) exp(-zeta^2) g(zeta) d zeta assembled
// from D / S through the explicit Hermite expansion. The moments are taken
// about the classical path (c = 0 in D): expanding about the lab origin is
// equivalent but loses digits to cancelling powers of q_c / l_z.
struct LongitudinalClosedForms {
  cplx cos2;    // g = cos^2(k z')
  cplx sin2k;   // g = sin(2 k z')
  cplx z_cos2;  // g = z' cos^2(k z')
};

inline LongitudinalClosedForms longitudinal_closed_forms(int n, double t, const EstaContext& ctx) {
  const double lz2 = std::numbers::sqrt2 * ctx.scales.l_z;
  const double delta = ctx.design.classical_position(t) - ctx.trap.position(t);
  const double klz = ctx.scales.k_lz;
  const cplx two_i(0.0, 2.0);
  LongitudinalClosedForms out{0.0, 0.0, 0.0};
  for (const auto& term : partition_terms(n)) {
    const double w = term.coefficient * std::pow(2.0, term.k1);
    const cplx d0 = d_function(term.k1, 0.0, delta, klz);
    const cplx d1 = d_function(term.k1 + 1, 0.0, delta, klz);
    out.cos2 += w * d0 / 4.0;
    out.sin2k += w * d_function_sine(term.k1, 0.0, delta, klz) / two_i;
    out.z_cos2 += w * (lz2 * d1 + delta * d0) / 4.0;
  }
  return out;
}

// Harmonic-trap part of the mode overlap, int H H H e^{-...} V, for n >= 1
// (the constant -U0 drops out by orthogonality).
inline double harmonic_overlap(const ModeIndex& m, double delta, const DerivedScales& s) {
  const double p3 = std::pow(std::numbers::pi, 1.5);
  double v = 0.0;
  if (m.nx == 2 && m.ny == 0 && m.nz == 0) v += s.omega_x;
  if (m.nx == 0 && m.ny == 2 && m.nz == 0) v += s.omega_y;
  if (m.nx == 0 && m.ny == 0 && m.nz == 2) v += s.omega_z;
  if (m.nx == 0 && m.ny == 0 && m.nz == 1) v += s.omega_z * delta / (std::numbers::sqrt2 * s.l_z);
  return p3 * v;
}

inline double beta_of(double l, double w) { return 4.0 * l * l / (w * w); }

inline QuadOptions time_options(double omega, double tf, double scale) {
  QuadOptions o;
  // The correction basis has large cancelling coefficients; its roundoff
  // floor sits near 1e-11 of the integrand scale.
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-10 * scale;
  o.initial_segments = std::max(4, static_cast<int>(std::ceil(omega * tf / std::numbers::pi)));
  o.max_segments = 20000;
  return o;
}

template <class F>
double sample_scale(const F& f, double tf) {
  double m = 0.0;
  for (int i = 0; i <= 64; ++i) m = std::max(m, magnitude(f(tf * i / 64.0)));
  return std::max(m * tf, 1e-300);
}

constexpr double kZetaCut = 8.0;

}  // namespace detail

// ---------------------------------------------------------------------------
// Mode matrix elements <n|U_F - V|0>(t) and <n|dU_F/dz|0>(t)

/// Frozen-waist closed form of <n| U_F - V |0>.
inline cplx overlap_approx(const ModeIndex& m, double t, const EstaContext& ctx) {
  if (m.transverse_parity_zero()) return 0.0;
  const auto& s = ctx.scales;
  if (ctx.harmonic_lattice) return 0.0;
  // The reference trap always follows the STA design.
  const double v = detail::harmonic_overlap(m, ctx.design.classical_position(t) - ctx.design.position(t), s);
  const double tx = transverse_overlap(m.nx, detail::beta_of(s.l_x, s.waist_x));
  const double ty = transverse_overlap(m.ny, detail::beta_of(s.l_y, s.waist_y));
  const auto lf = detail::longitudinal_closed_forms(m.nz, t, ctx);
  return mode_normalization(m) * (-s.depth * tx * ty * lf.cos2 - v);
}

/// Exact-waist <n| U_F - V |0> by quadrature over the longitudinal coordinate.
inline double overlap_exact(const ModeIndex& m, double t, const EstaContext& ctx, const QuadOptions& zopt) {
  if (m.transverse_parity_zero() || ctx.harmonic_lattice) return 0.0;
  const auto& s = ctx.scales;
  const Potential pot(s);
  const double lz2 = std::numbers::sqrt2 * s.l_z;
  const double delta = ctx.design.classical_position(t) - ctx.trap.position(t);
  const double txh = transverse_overlap(m.nx, 0.0), tyh = transverse_overlap(m.ny, 0.0);
  const double mxh = transverse_second_moment(m.nx, 0.0), myh = transverse_second_moment(m.ny, 0.0);
  auto integrand = [&](double zeta) {
    const double zp = lz2 * zeta + delta;
    const double wx = pot.waist_at(Axis::X, zp), wy = pot.waist_at(Axis::Y, zp);
    const double spot = s.waist_x * s.waist_y / (wx * wy);
    const double c = std::cos(kWavenumber * zp);
    const double lattice = -s.depth * spot * c * c * transverse_overlap(m.nx, detail::beta_of(s.l_x, wx)) *
                           transverse_overlap(m.ny, detail::beta_of(s.l_y, wy));
    const double zr = (zp + ctx.trap.position(t) - ctx.design.position(t)) / lz2;
    const double harmonic = txh * tyh * (-s.depth + 0.5 * s.omega_z * zr * zr) + 0.5 * s.omega_x * mxh * tyh +
                            0.5 * s.omega_y * txh * myh;
    return hermite(m.nz, zeta) * std::exp(-zeta * zeta) * (lattice - harmonic);
  };
  return mode_normalization(m) * quad1d(integrand, -detail::kZetaCut, detail::kZetaCut, zopt).value;
}

/// Frozen-waist closed form of <n| dU_F/dz |0>, curvature terms to first order
/// in z'/Z_R.
inline cplx force_overlap_approx(const ModeIndex& m, double t, const EstaContext& ctx) {
  if (m.transverse_parity_zero()) return 0.0;
  const auto& s = ctx.scales;
  const double bx = detail::beta_of(s.l_x, s.waist_x), by = detail::beta_of(s.l_y, s.waist_y);
  const double tx = transverse_overlap(m.nx, bx), ty = transverse_overlap(m.ny, by);
  const double mx = transverse_second_moment(m.nx, bx), my = transverse_second_moment(m.ny, by);
  const auto lf = detail::longitudinal_closed_forms(m.nz, t, ctx);
  const double curvature = (tx - 2.0 * bx * mx) * ty / (s.rayleigh_x * s.rayleigh_x) +
                           (ty - 2.0 * by * my) * tx / (s.rayleigh_y * s.rayleigh_y);
  return mode_normalization(m) * s.depth * (kWavenumber * tx * ty * lf.sin2k + curvature * lf.z_cos2);
}

inline double force_overlap_exact(const ModeIndex& m, double t, const EstaContext& ctx, const QuadOptions& zopt) {
  if (m.transverse_parity_zero()) return 0.0;
  const auto& s = ctx.scales;
  const Potential pot(s);
  const double lz2 = std::numbers::sqrt2 * s.l_z;
  const double delta = ctx.design.classical_position(t) - ctx.trap.position(t);
  auto integrand = [&](double zeta) {
    const double zp = lz2 * zeta + delta;
    const double wx = pot.waist_at(Axis::X, zp), wy = pot.waist_at(Axis::Y, zp);
    const double bx = detail::beta_of(s.l_x, wx), by = detail::beta_of(s.l_y, wy);
    const double tx = transverse_overlap(m.nx, bx), ty = transverse_overlap(m.ny, by);
    const double mx = transverse_second_moment(m.nx, bx), my = transverse_second_moment(m.ny, by);
    const double spot = s.waist_x * s.waist_y / (wx * wy);
    const double c = std::cos(kWavenumber * zp);
    const double curvature = zp * (tx - 2.0 * bx * mx) * ty / (s.rayleigh_x * s.rayleigh_x + zp * zp) +
                             zp * (ty - 2.0 * by * my) * tx / (s.rayleigh_y * s.rayleigh_y + zp * zp);
    const double force =
        s.depth * spot * (kWavenumber * std::sin(2.0 * kWavenumber * zp) * tx * ty + c * c * curvature);
    return hermite(m.nz, zeta) * std::exp(-zeta * zeta) * force;
  };
  return mode_normalization(m) * quad1d(integrand, -detail::kZetaCut, detail::kZetaCut, zopt).value;
}

// ---------------------------------------------------------------------------
// G_n and K_n

enum class GKRoute { Approx, Exact };

struct GKPair {
  ModeIndex mode;
  cplx g = 0.0;
  CVec6 k{};
  bool parity_zero = false;
};

namespace detail {

inline QuadOptions zeta_options() {
  QuadOptions o;
  o.rel_tol = 1e-12;
  o.abs_tol = 0.0;
  o.magnitude_rel_tol = 1e-13;
  o.initial_segments = 8;
  return o;
}

template <class Overlap>
cplx g_integral(const ModeIndex& m, const EstaContext& ctx, const Overlap& overlap) {
  const double tf = ctx.trap.final_time();
  const double w = mode_frequency(m, ctx.scales);
  auto f = [&](double t) { return std::exp(cplx(0.0, w * t)) * cplx(overlap(t)); };
  return quad1d(f, 0.0, tf, time_options(w, tf, sample_scale(f, tf))).value;
}

template <class Overlap>
CVec6 k_integral(const ModeIndex& m, const EstaContext& ctx, const Overlap& force) {
  const double tf = ctx.trap.final_time();
  const double w = mode_frequency(m, ctx.scales);
  const auto basis = f_basis(f_coefficients());
  auto f = [&](double t) {
    const cplx base = -std::exp(cplx(0.0, w * t)) * cplx(force(t));
    CVec6 out;
    for (int j = 0; j < 6; ++j) out[j] = base * basis[j].derivative(t / tf);
    return out;
  };
  return quad1d(f, 0.0, tf, time_options(w, tf, sample_scale(f, tf))).value;
}

}  // namespace detail

/// G_n = int_0^tf e^{i Omega_n t} <n| U_F - V |0>(t) dt.
inline cplx g_mode_approx(const ModeIndex& m, const EstaContext& ctx) {
  if (m.transverse_parity_zero() || ctx.harmonic_lattice) return 0.0;
  return detail::g_integral(m, ctx, [&](double t) { return overlap_approx(m, t, ctx); });
}

inline cplx g_mode_exact(const ModeIndex& m, const EstaContext& ctx) {
  if (m.transverse_parity_zero() || ctx.harmonic_lattice) return 0.0;
  const auto zopt = detail::zeta_options();
  return detail::g_integral(m, ctx, [&](double t) { return overlap_exact(m, t, ctx, zopt); });
}

/// K_n = dG_n/d alpha = -int_0^tf e^{i Omega_n t} f_j(t) <n| dU_F/dz |0>(t) dt.
inline CVec6 k_mode_approx(const ModeIndex& m, const EstaContext& ctx) {
  if (m.transverse_parity_zero()) return {};
  return detail::k_integral(m, ctx, [&](double t) { return force_overlap_approx(m, t, ctx); });
}

inline CVec6 k_mode_exact(const ModeIndex& m, const EstaContext& ctx) {
  if (m.transverse_parity_zero()) return {};
  const auto zopt = detail::zeta_options();
  return detail::k_integral(m, ctx, [&](double t) { return force_overlap_exact(m, t, ctx, zopt); });
}

inline GKPair gk_pair(const ModeIndex& m, const EstaContext& ctx, GKRoute route = GKRoute::Approx) {
  GKPair p;
  p.mode = m;
  p.parity_zero = m.transverse_parity_zero();
  if (p.parity_zero) return p;
  p.g = route == GKRoute::Approx ? g_mode_approx(m, ctx) : g_mode_exact(m, ctx);
  p.k = route == GKRoute::Approx ? k_mode_approx(m, ctx) : k_mode_exact(m, ctx);
  return p;
}

// ---------------------------------------------------------------------------
// Correction vector

struct CorrectionVector {
  std::array<double, 6> epsilon{};
  int cutoff_N = 0;
  GKRoute route = GKRoute::Approx;
  std::vector<GKPair> modes;
  RVec6 gradient{};                // sum_n Re(G_n^* K_n)
  double g_norm_squared = 0.0;     // sum_n |G_n|^2
  double fidelity_estimate = 1.0;  // 1 - sum_n |G_n|^2
  bool degenerate = false;
  std::string warning;
  double seconds = 0.0;
};

inline RVec6 re_gk_sum(const std::vector<GKPair>& modes) {
  RVec6 v;
  for (const auto& p : modes)
    for (int j = 0; j < 6; ++j) v[j] += std::real(std::conj(p.g) * p.k[j]);
  return v;
}

/// eps = -(sum |G|^2) v / |v|^2 with v = sum Re(G^* K).
inline CorrectionVector correction_from_modes(std::vector<GKPair> modes, int cutoff) {
  CorrectionVector cv;
  cv.cutoff_N = cutoff;
  for (const auto& p : modes) cv.g_norm_squared += std::norm(p.g);
  cv.fidelity_estimate = 1.0 - cv.g_norm_squared;
  cv.gradient = re_gk_sum(modes);
  const double v2 = magnitude(cv.gradient) * magnitude(cv.gradient);
  cv.modes = std::move(modes);
  if (!(magnitude(cv.gradient) >= 1e-300)) {
    cv.degenerate = true;
    cv.warning = "degenerate gradient: no correction direction, epsilon set to zero";
    return cv;
  }
  for (int j = 0; j < 6; ++j) cv.epsilon[j] = -cv.g_norm_squared * cv.gradient[j] / v2;
  return cv;
}

/// Same correction written as a Newton step on the fidelity estimate
/// F = 1 - sum |G|^2 with gradient dF = -2 sum Re(G^* K):
///   eps = 2 (1 - F) dF / |dF|^2.
inline std::array<double, 6> correction_newton_form(const std::vector<GKPair>& modes) {
  double f = 1.0;
  for (const auto& p : modes) f -= std::norm(p.g);
  RVec6 grad;
  for (const auto& p : modes)
    for (int j = 0; j < 6; ++j) grad[j] += -2.0 * std::real(p.g * std::conj(p.k[j]));
  const double n2 = magnitude(grad) * magnitude(grad);
  std::array<double, 6> eps{};
  if (!(n2 > 0.0)) return eps;
  for (int j = 0; j < 6; ++j) eps[j] = 2.0 * (1.0 - f) * grad[j] / n2;
  return eps;
}

inline CorrectionVector compute_epsilon(const EstaContext& ctx, int cutoff, GKRoute route = GKRoute::Approx) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<GKPair> modes;
  for (const auto& m : modes_up_to(cutoff)) modes.push_back(gk_pair(m, ctx, route));
  auto cv = correction_from_modes(std::move(modes), cutoff);
  cv.route = route;
  cv.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cv;
}

inline CorrectionVector compute_epsilon(const DerivedScales& s, int cutoff, GKRoute route = GKRoute::Approx) {
  return compute_epsilon(EstaContext::sta(s), cutoff, route);
}

}  // namespace ocb
