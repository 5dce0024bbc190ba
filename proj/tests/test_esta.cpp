#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>

#include "ocb/esta.hpp"

using namespace ocb;

namespace {

DerivedScales scales(double u0 = 60.0, double tf = 3.0, double d = 85.0, double w = 4.2e6) {
  SystemParams p;
  p.depth_U0 = u0;
  p.distance_d = d;
  p.final_time_tf = tf;
  p.waist_x_w0 = w;
  p.waist_y_w0 = w;
  return derive_scales(p);
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

double rel(const CVec6& a, const CVec6& b) { return magnitude(a - b) / magnitude(b); }

}  // namespace

TEST(Modes, EnumerationWithParity) {
  const auto m2 = modes_up_to(2);
  ASSERT_EQ(m2.size(), 4u);
  EXPECT_EQ(m2[0], (ModeIndex{0, 0, 1}));
  EXPECT_EQ(m2[1], (ModeIndex{0, 0, 2}));
  EXPECT_EQ(m2[2], (ModeIndex{0, 2, 0}));
  EXPECT_EQ(m2[3], (ModeIndex{2, 0, 0}));
  EXPECT_EQ(modes_up_to(1).size(), 1u);
  EXPECT_THROW(modes_up_to(0), ConfigError);
  EXPECT_EQ(to_string(ModeIndex{1, 2, 3}), "(1,2,3)");
}

TEST(Modes, TransverseIntegralsAgainstQuadrature) {
  for (double beta : {0.0, 1e-6, 0.3})
    for (int n = 0; n <= 6; ++n) {
      const auto r0 = quad1d([&](double x) { return hermite(n, x) * std::exp(-(1.0 + beta) * x * x); }, -12.0, 12.0,
                             {1e-12, 1e-12, 5000, 8, 1e-13});
      const auto r2 = quad1d([&](double x) { return x * x * hermite(n, x) * std::exp(-(1.0 + beta) * x * x); },
                             -12.0, 12.0, {1e-12, 1e-12, 5000, 8, 1e-13});
      EXPECT_NEAR(transverse_overlap(n, beta), r0.value, 1e-10 * std::max(1.0, std::abs(r0.value)));
      EXPECT_NEAR(transverse_second_moment(n, beta), r2.value, 1e-10 * std::max(1.0, std::abs(r2.value)));
      if (n % 2 == 1) EXPECT_EQ(transverse_overlap(n, beta), 0.0);
    }
}

TEST(Modes, ParitySelectionUpToOrderFour) {
  const auto s = scales();
  const auto ctx = EstaContext::sta(s);
  for (int nx = 0; nx <= 4; ++nx)
    for (int ny = 0; nx + ny <= 4; ++ny)
      for (int nz = 0; nx + ny + nz <= 4; ++nz) {
        const ModeIndex m{nx, ny, nz};
        if (m.order() == 0 || !m.transverse_parity_zero()) continue;
        const auto p = gk_pair(m, ctx);
        EXPECT_TRUE(p.parity_zero);
        EXPECT_EQ(p.g, cplx(0.0));
        EXPECT_EQ(magnitude(p.k), 0.0);
        EXPECT_EQ(g_mode_approx(m, ctx), cplx(0.0));
        EXPECT_EQ(magnitude(k_mode_approx(m, ctx)), 0.0);
      }
  EXPECT_EQ(g_mode_approx({1, 0, 0}, ctx), cplx(0.0));
}

TEST(DFunction, OrderZeroClosedForm) {
  for (double delta : {0.0, 0.3, -1.1}) {
    const double klz = 0.2;
    const cplx d = d_function(0, 0.7, delta, klz);
    const double expect =
        std::sqrt(std::numbers::pi) * (2.0 + 2.0 * std::exp(-2.0 * klz * klz) * std::cos(2.0 * kWavenumber * delta));
    EXPECT_NEAR(d.real(), expect, 1e-14);
    EXPECT_NEAR(d.imag(), 0.0, 1e-14);
  }
}

TEST(DFunction, OrderOneCentredIsReal) {
  const cplx d = d_function(1, 0.0, 0.0, 0.25);
  EXPECT_NEAR(d.imag(), 0.0, 1e-15);
}

TEST(DFunction, MatchesDirectQuadrature) {
  const double klz = 0.18, lz2 = std::numbers::sqrt2 * klz / kWavenumber;
  for (double c : {0.0, 0.8, -2.3})
    for (double delta : {0.0, 0.4})
      for (int l = 0; l <= 5; ++l) {
        const double q0 = lz2 * c - delta;
        const auto cosq = quad1d(
            [&](double z) {
              const double zp = lz2 * z - q0;
              return 4.0 * std::pow(z, l) * std::exp(-(z - c) * (z - c)) * std::pow(std::cos(kWavenumber * zp), 2);
            },
            c - 12.0, c + 12.0, {1e-12, 1e-12});
        const auto sinq = quad1d(
            [&](double z) {
              const double zp = lz2 * z - q0;
              return 2.0 * std::pow(z, l) * std::exp(-(z - c) * (z - c)) * std::sin(2.0 * kWavenumber * zp);
            },
            c - 12.0, c + 12.0, {1e-12, 1e-12});
        const double scale = std::max(1.0, std::abs(cosq.value));
        EXPECT_LT(std::abs(d_function(l, c, delta, klz) - cosq.value), 1e-10 * scale) << l << " " << c;
        EXPECT_LT(std::abs(d_function_sine(l, c, delta, klz) - cplx(0.0, sinq.value)), 1e-10 * scale);
      }
}

TEST(DFunction, MidTransportValueAgainstQuadrature) {
  const auto s = scales();
  const auto ctx = EstaContext::sta(s);
  const double t = s.final_time / 2.0;
  const double lz2 = std::numbers::sqrt2 * s.l_z;
  const double qc = ctx.design.classical_position(t), q0 = ctx.trap.position(t);
  const double c = qc / lz2;
  const auto r = quad1d(
      [&](double z) {
        return 4.0 * z * z * std::exp(-(z - c) * (z - c)) * std::pow(std::cos(kWavenumber * (lz2 * z - q0)), 2);
      },
      c - 10.0, c + 10.0, {0.0, 1e-13});
  EXPECT_LT(rel(d_function(2, t, ctx), cplx(r.value)), 1e-9);
}

TEST(Overlaps, ApproxMatchesExactPointwise) {
  const auto s = scales();
  const auto ctx = EstaContext::sta(s);
  const auto zopt = detail::zeta_options();
  for (const auto& m : modes_up_to(2))
    for (double u : {0.13, 0.5, 0.71}) {
      const double t = u * s.final_time;
      const double exact = overlap_exact(m, t, ctx, zopt);
      EXPECT_NEAR(overlap_approx(m, t, ctx).real(), exact, 1e-5 * std::abs(exact) + 1e-12) << to_string(m);
      EXPECT_NEAR(overlap_approx(m, t, ctx).imag(), 0.0, 1e-9 * std::abs(exact) + 1e-12);
      const double fe = force_overlap_exact(m, t, ctx, zopt);
      EXPECT_NEAR(force_overlap_approx(m, t, ctx).real(), fe, 1e-5 * std::abs(fe) + 1e-12) << to_string(m);
    }
}

TEST(Overlaps, HarmonicLatticeGivesNoCorrection) {
  auto ctx = EstaContext::sta(scales());
  ctx.harmonic_lattice = true;
  for (const auto& m : modes_up_to(2)) EXPECT_EQ(g_mode_approx(m, ctx), cplx(0.0));
  const auto cv = compute_epsilon(ctx, 2);
  EXPECT_TRUE(cv.degenerate);
  EXPECT_FALSE(cv.warning.empty());
  for (double e : cv.epsilon) EXPECT_EQ(e, 0.0);
}

TEST(Overlaps, AnharmonicPartShrinksWithDepth) {
  // <n|U_F - V|0> stays of order one recoil energy while the harmonic part
  // grows like sqrt(U0), so their ratio falls off as U0^(-1/2).
  const ModeIndex m{0, 0, 2};
  std::vector<double> ratio;
  for (double u0 : {60.0, 600.0, 6000.0}) {
    const auto s = scales(u0, 3.0, 30.0);
    const auto ctx = EstaContext::sta(s);
    const double diff = std::abs(overlap_approx(m, 0.5 * s.final_time, ctx));
    const double harm = detail::harmonic_overlap(m, 0.0, s) * mode_normalization(m);
    ratio.push_back(diff / harm);
  }
  EXPECT_LT(ratio[0], 0.2);
  EXPECT_NEAR(ratio[0] / ratio[1], std::sqrt(10.0), 0.2);
  EXPECT_NEAR(ratio[1] / ratio[2], std::sqrt(10.0), 0.2);
}

TEST(GK, ApproxAgreesWithQuadratureOracle) {
  const auto s = scales();
  const auto ctx = EstaContext::sta(s);
  double t_approx = 0.0, t_exact = 0.0;
  for (const auto& m : modes_up_to(2)) {
    auto t0 = std::chrono::steady_clock::now();
    const auto a = gk_pair(m, ctx, GKRoute::Approx);
    auto t1 = std::chrono::steady_clock::now();
    const auto e = gk_pair(m, ctx, GKRoute::Exact);
    auto t2 = std::chrono::steady_clock::now();
    t_approx += std::chrono::duration<double>(t1 - t0).count();
    t_exact += std::chrono::duration<double>(t2 - t1).count();
    EXPECT_LT(rel(a.g, e.g), 1e-4) << to_string(m);
    EXPECT_LT(rel(a.k, e.k), 1e-4) << to_string(m);
  }
  RecordProperty("approx_seconds", std::to_string(t_approx));
  RecordProperty("exact_seconds", std::to_string(t_exact));
  std::printf("approx %.3fs exact %.3fs speedup %.1fx\n", t_approx, t_exact, t_exact / t_approx);
}

TEST(GK, ApproxAgreesAcrossParameterGrid) {
  for (double u0 : {30.0, 200.0, 1000.0})
    for (double tf : {2.5, 4.0, 6.0}) {
      const auto ctx = EstaContext::sta(scales(u0, tf));
      for (const auto& m : modes_up_to(2)) {
        const cplx a = g_mode_approx(m, ctx), e = g_mode_exact(m, ctx);
        EXPECT_LT(rel(a, e), 1e-3) << u0 << " " << tf << " " << to_string(m);
      }
    }
}

TEST(GK, KIsDerivativeOfG) {
  const auto s = scales();
  const auto design = sta_path(s);
  const double h = 1e-3 * s.l_z;
  for (const auto& m : modes_up_to(2)) {
    const auto k = k_mode_approx(m, EstaContext::sta(s));
    for (int j = 0; j < 6; ++j) {
      std::array<double, 6> plus{}, minus{};
      plus[j] = h;
      minus[j] = -h;
      const EstaContext cp{s, esta_path(s, plus), design, false};
      const EstaContext cm{s, esta_path(s, minus), design, false};
      const cplx fd = (g_mode_approx(m, cp) - g_mode_approx(m, cm)) / (2.0 * h);
      EXPECT_LT(std::abs(fd - k[j]), 1e-6 * magnitude(k)) << to_string(m) << " j=" << j;
    }
  }
}

TEST(GK, KScalesLinearlyWithPathDerivativeBasis) {
  // K only sees the path through q0; doubling the overlap doubles K.
  const auto s = scales();
  const auto ctx = EstaContext::sta(s);
  const ModeIndex m{0, 0, 1};
  const auto k1 = detail::k_integral(m, ctx, [&](double t) { return force_overlap_approx(m, t, ctx); });
  const auto k2 = detail::k_integral(m, ctx, [&](double t) { return 2.0 * force_overlap_approx(m, t, ctx); });
  EXPECT_LT(magnitude(k2 - 2.0 * k1), 1e-9 * magnitude(k1));
}

TEST(Epsilon, NewtonFormAndDirection) {
  const auto s = scales();
  const auto cv = compute_epsilon(s, 2);
  ASSERT_FALSE(cv.degenerate);
  const auto newton = correction_newton_form(cv.modes);
  double norm = 0.0;
  for (double e : cv.epsilon) norm = std::max(norm, std::abs(e));
  for (int j = 0; j < 6; ++j) EXPECT_NEAR(newton[j], cv.epsilon[j], 1e-12 * norm);
  // Anti-parallel to sum Re(G* K), with |eps| |v| = sum |G|^2.
  double dot = 0.0, ne = 0.0;
  for (int j = 0; j < 6; ++j) {
    dot += cv.epsilon[j] * cv.gradient[j];
    ne += cv.epsilon[j] * cv.epsilon[j];
  }
  ne = std::sqrt(ne);
  const double nv = magnitude(cv.gradient);
  EXPECT_NEAR(-dot / (ne * nv), 1.0, 1e-12);
  EXPECT_NEAR(ne * nv / cv.g_norm_squared, 1.0, 1e-12);
  EXPECT_NEAR(cv.fidelity_estimate, 1.0 - cv.g_norm_squared, 1e-15);
}

TEST(Epsilon, CutoffOneCloseToCutoffTwo) {
  const auto s = scales();
  const auto e1 = compute_epsilon(s, 1).epsilon, e2 = compute_epsilon(s, 2).epsilon;
  double diff = 0.0, norm = 0.0;
  for (int j = 0; j < 6; ++j) {
    diff += (e1[j] - e2[j]) * (e1[j] - e2[j]);
    norm += e2[j] * e2[j];
  }
  EXPECT_LT(std::sqrt(diff / norm), 0.05);
}

TEST(Epsilon, LinearModelPredictsSmallerG) {
  // One linearized step removes the first-order G: G + K.eps has smaller norm.
  const auto s = scales();
  const auto cv = compute_epsilon(s, 2);
  double before = 0.0, after = 0.0;
  for (const auto& p : cv.modes) {
    cplx g = p.g;
    for (int j = 0; j < 6; ++j) g += p.k[j] * cv.epsilon[j];
    before += std::norm(p.g);
    after += std::norm(g);
  }
  EXPECT_LT(after, before);
}

TEST(Epsilon, DeterministicAndRoutesAgree) {
  const auto s = scales();
  const auto a = compute_epsilon(s, 2), b = compute_epsilon(s, 2);
  for (int j = 0; j < 6; ++j) EXPECT_EQ(a.epsilon[j], b.epsilon[j]);
  const auto e = compute_epsilon(s, 2, GKRoute::Exact);
  double diff = 0.0, norm = 0.0;
  for (int j = 0; j < 6; ++j) {
    diff = std::max(diff, std::abs(a.epsilon[j] - e.epsilon[j]));
    norm = std::max(norm, std::abs(e.epsilon[j]));
  }
  EXPECT_LT(diff / norm, 1e-3);
}
