#pragma once

// Special functions and quadrature for the mode-overlap integrals: Hermite
// polynomials (physicists' convention), Gamma at half-integers, Gaussian
// moment integrals, and adaptive Gauss-Kronrod quadrature for scalar,
// complex and small-vector integrands.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "ocb/error.hpp"

namespace ocb {

using cplx = std::complex<double>;

/// Fixed-size vector with just enough arithmetic to be a quadrature value.
template <class T, std::size_t N>
struct SmallVec {
  std::array<T, N> v{};

  T& operator[](std::size_t i) { return v[i]; }
  const T& operator[](std::size_t i) const { return v[i]; }
  static constexpr std::size_t size() { return N; }

  SmallVec& operator+=(const SmallVec& o) {
    for (std::size_t i = 0; i < N; ++i) v[i] += o.v[i];
    return *this;
  }
  SmallVec& operator-=(const SmallVec& o) {
    for (std::size_t i = 0; i < N; ++i) v[i] -= o.v[i];
    return *this;
  }
  SmallVec& operator*=(double s) {
    for (auto& x : v) x *= s;
    return *this;
  }
  friend SmallVec operator+(SmallVec a, const SmallVec& b) { return a += b; }
  friend SmallVec operator-(SmallVec a, const SmallVec& b) { return a -= b; }
  friend SmallVec operator*(double s, SmallVec a) { return a *= s; }
  friend SmallVec operator*(SmallVec a, double s) { return a *= s; }
};

using CVec6 = SmallVec<cplx, 6>;
using RVec6 = SmallVec<double, 6>;

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const cplx& z) { return std::abs(z); }
template <class T, std::size_t N>
double magnitude(const SmallVec<T, N>& a) {
  double s = 0;
  for (const auto& x : a.v) s += std::norm(x);
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Combinatorics

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// ---------------------------------------------------------------------------
// Hermite polynomials

/// H_n(x) by the three-term recurrence H_{n+1} = 2x H_n - 2n H_{n-1}.
inline double hermite(int n, double x) {
  if (n < 0) throw ConfigError("hermite: negative order");
  double h0 = 1.0;
  if (n == 0) return h0;
  double h1 = 2.0 * x;
  for (int k = 1; k < n; ++k) {
    const double h2 = 2.0 * x * h1 - 2.0 * k * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

/// One monomial of the explicit Hermite expansion
///   H_n(x) = sum_{k1 + 2 k2 = n} coefficient * (2x)^{k1},
/// coefficient = (-1)^{k2} n! / (k1! k2!).
struct PartitionTerm {
  int k1 = 0;
  int k2 = 0;
  double coefficient = 0.0;
};

inline std::vector<PartitionTerm> partition_terms(int n) {
  if (n < 0) throw ConfigError("partition_terms: negative order");
  std::vector<PartitionTerm> terms;
  terms.reserve(n / 2 + 1);
  for (int k2 = 0; 2 * k2 <= n; ++k2) {
    const int k1 = n - 2 * k2;
    const double sign = (k2 % 2 == 0) ? 1.0 : -1.0;
    terms.push_back({k1, k2, sign * factorial(n) / (factorial(k1) * factorial(k2))});
  }
  return terms;
}

inline double hermite_explicit(int n, double x) {
  double s = 0.0;
  for (const auto& t : partition_terms(n)) s += t.coefficient * std::pow(2.0 * x, t.k1);
  return s;
}

// ---------------------------------------------------------------------------
// Gamma at half-integers and Gaussian moments

/// Gamma(j + 1/2) for integer j >= 0.
inline double gamma_half(int j) {
  if (j < 0) throw ConfigError("gamma_half: negative index");
  double g = std::sqrt(std::numbers::pi);
  for (int i = 0; i < j; ++i) g *= (i + 0.5);
  return g;
}

/// Closed form of  integral x^n exp(-a x^2 + b x + c) dx  over the real line,
///   exp(b^2/4a + c) sum_k C(n,2k) (b/2a)^{n-2k} Gamma(k+1/2) / a^{k+1/2}.
/// b and c may be complex.
template <class Scalar>
Scalar gaussian_moment_integral(int n, double a, Scalar b, Scalar c) {
  if (!(a > 0.0)) throw ConfigError("gaussian_moment_integral: a must be positive");
  if (n < 0) throw ConfigError("gaussian_moment_integral: negative power");
  const Scalar shift = b / (2.0 * a);
  Scalar sum = 0.0;
  for (int k = 0; 2 * k <= n; ++k) {
    Scalar p = 1.0;
    for (int i = 0; i < n - 2 * k; ++i) p *= shift;
    sum += binomial(n, 2 * k) * p * gamma_half(k) / std::pow(a, k + 0.5);
  }
  return std::exp(b * b / (4.0 * a) + c) * sum;
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod (7/15) quadrature

struct QuadOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_segments = 5000;
  int initial_segments = 1;
  // Tolerance relative to the integral of |f|, for integrals that cancel.
  double magnitude_rel_tol = 0.0;
};

template <class T>
struct QuadResult {
  T value{};
  double error = 0.0;
  int evaluations = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for nodes kKronrodNodes[1], [3], [5], [7].
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T>
struct Segment {
  double a, b;
  T value;
  double error;
  double absolute;
};

template <class F>
auto kronrod15(const F& f, double a, double b) {
  using T = decltype(f(a));
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const T fc = f(center);
  T kronrod = kKronrodWeights[7] * fc;
  T gauss = kGaussWeights[3] * fc;
  double absolute = kKronrodWeights[7] * magnitude(fc);
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kKronrodNodes[i];
    const T lo = f(center - dx);
    const T hi = f(center + dx);
    const T sum = lo + hi;
    kronrod += kKronrodWeights[i] * sum;
    absolute += kKronrodWeights[i] * (magnitude(lo) + magnitude(hi));
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  absolute *= std::abs(half);
  // QUADPACK-style scaling of the Kronrod-Gauss difference, with a roundoff
  // floor relative to the integral of |f|.
  double error = magnitude(kronrod - gauss);
  if (absolute > 0.0 && error > 0.0) error = absolute * std::min(1.0, std::pow(200.0 * error / absolute, 1.5));
  error = std::max(error, 50.0 * std::numeric_limits<double>::epsilon() * absolute);
  return Segment<T>{a, b, kronrod, error, absolute};
}

}  // namespace detail

/// Globally adaptive quadrature of f over [a, b]; bisects the segment with
/// the largest error estimate until the total estimate meets the tolerance.
template <class F>
auto quad1d(const F& f, double a, double b, const QuadOptions& opt = {}) {
  using T = decltype(f(a));
  std::vector<detail::Segment<T>> segments;
  const int n0 = std::max(1, opt.initial_segments);
  for (int i = 0; i < n0; ++i) {
    const double lo = a + (b - a) * i / n0;
    const double hi = (i + 1 == n0) ? b : a + (b - a) * (i + 1) / n0;
    segments.push_back(detail::kronrod15(f, lo, hi));
  }
  int evaluations = 15 * n0;
  T value{};
  double error = 0.0, absolute = 0.0;
  auto totals = [&]() {
    value = segments.front().value;
    error = segments.front().error;
    absolute = segments.front().absolute;
    for (std::size_t i = 1; i < segments.size(); ++i) {
      value += segments[i].value;
      error += segments[i].error;
      absolute += segments[i].absolute;
    }
  };
  totals();
  auto tolerance = [&]() {
    return std::max({opt.abs_tol, opt.rel_tol * magnitude(value), opt.magnitude_rel_tol * absolute});
  };
  while (error > tolerance()) {
    if (static_cast<int>(segments.size()) >= opt.max_segments) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "quad1d: tolerance not reached within the segment limit (error %.3g, tolerance %.3g)",
                    error, tolerance());
      throw NumericsError(msg);
    }
    auto worst = std::max_element(segments.begin(), segments.end(),
                                  [](const auto& l, const auto& r) { return l.error < r.error; });
    const double mid = 0.5 * (worst->a + worst->b);
    if (!(mid > worst->a && mid < worst->b))
      throw NumericsError("quad1d: interval cannot be subdivided further");
    auto left = detail::kronrod15(f, worst->a, mid);
    auto right = detail::kronrod15(f, mid, worst->b);
    *worst = left;
    segments.push_back(right);
    evaluations += 30;
    totals();
  }
  return QuadResult<T>{value, error, evaluations};
}

/// Iterated adaptive quadrature over [ax, bx] x [ay, by]; f(x, y).
template <class F>
auto quad2d(const F& f, double ax, double bx, double ay, double by, const QuadOptions& opt = {},
            const QuadOptions& inner = {}) {
  using T = decltype(f(ax, ay));
  double inner_error = 0.0;
  int evaluations = 0;
  auto outer = quad1d(
      [&](double x) -> T {
        auto r = quad1d([&](double y) { return f(x, y); }, ay, by, inner);
        inner_error = std::max(inner_error, r.error);
        evaluations += r.evaluations;
        return r.value;
      },
      ax, bx, opt);
  return QuadResult<T>{outer.value, outer.error + inner_error * (bx - ax), evaluations};
}

}  // namespace ocb
