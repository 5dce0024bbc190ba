#pragma once

// Trap-minimum trajectories q0(t) for the four transport protocols, and the
// classical atom path q_c(t) that the harmonic approximation predicts for
// them.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocb/error.hpp"
#include "ocb/scales.hpp"

namespace ocb {

enum class PathKind { STA, eSTA, Sine, Triangle };

inline std::string_view to_string(PathKind k) {
  switch (k) {
    case PathKind::STA:
      return "STA";
    case PathKind::eSTA:
      return "eSTA";
    case PathKind::Sine:
      return "sine";
    case PathKind::Triangle:
      return "triangle";
  }
  return "?";
}

inline PathKind parse_path_kind(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "sta") return PathKind::STA;
  if (s == "esta") return PathKind::eSTA;
  if (s == "sine") return PathKind::Sine;
  if (s == "triangle" || s == "bang-bang") return PathKind::Triangle;
  throw ConfigError("unknown method: " + std::string(name));
}

/// Polynomial in the reduced time s = t/t_f, with derivative helpers.
class ReducedPolynomial {
 public:
  ReducedPolynomial() = default;
  explicit ReducedPolynomial(std::vector<double> coefficients) : c_(std::move(coefficients)) {}

  const std::vector<double>& coefficients() const { return c_; }
  int degree() const { return static_cast<int>(c_.size()) - 1; }

  /// d^order/ds^order evaluated at s.
  double derivative(double s, int order = 0) const {
    double acc = 0.0;
    for (int n = degree(); n >= order; --n) {
      double falling = 1.0;
      for (int i = 0; i < order; ++i) falling *= (n - i);
      acc = acc * s + falling * c_[n];
    }
    return acc;
  }

  ReducedPolynomial differentiated(int order = 1) const {
    std::vector<double> out;
    for (int n = order; n <= degree(); ++n) {
      double falling = 1.0;
      for (int i = 0; i < order; ++i) falling *= (n - i);
      out.push_back(falling * c_[n]);
    }
    if (out.empty()) out.push_back(0.0);
    return ReducedPolynomial(std::move(out));
  }

  ReducedPolynomial& operator+=(const ReducedPolynomial& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0.0);
    for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  ReducedPolynomial& operator*=(double k) {
    for (auto& x : c_) x *= k;
    return *this;
  }

 private:
  std::vector<double> c_;
};

// ---------------------------------------------------------------------------
// STA: invariant-based inverse engineering for the harmonic trap

/// q_c(s) = d sum_{n=5}^{9} c_n s^n and q0(s) = d sum_{n=3}^{9} b_n s^n with
/// b_n = const_n + inv_n (t_f omega_z)^{-2}.
struct StaPolynomial {
  std::array<double, 5> c{};          // c_5 .. c_9
  std::array<double, 7> b_const{};    // b_3 .. b_9, (t_f w_z)^0 part
  std::array<double, 7> b_inverse{};  // b_3 .. b_9, (t_f w_z)^-2 part
  std::array<double, 7> b{};          // evaluated at the given t_f, omega_z
  double tf = 0, d = 0, omega_z = 0;
};

/// Coefficients of the minimal-degree polynomial q_c(s) with q_c(0)=0,
/// q_c(1)=1 and vanishing derivatives of orders 1..4 at both ends. Solved as a
/// 5x5 linear system for s^5..s^9.
inline std::array<double, 5> classical_path_coefficients() {
  Eigen::Matrix<long double, 5, 5> m;
  Eigen::Matrix<long double, 5, 1> rhs;
  for (int order = 0; order < 5; ++order) {
    for (int j = 0; j < 5; ++j) {
      const int n = 5 + j;
      long double falling = 1;
      for (int i = 0; i < order; ++i) falling *= (n - i);
      m(order, j) = falling;
    }
    rhs(order) = order == 0 ? 1 : 0;
  }
  Eigen::Matrix<long double, 5, 1> x = m.fullPivLu().solve(rhs);
  std::array<double, 5> c{};
  for (int j = 0; j < 5; ++j) c[j] = static_cast<double>(std::round(x(j)));
  return c;
}

inline StaPolynomial sta_polynomial(double tf, double d, double omega_z) {
  if (!(tf > 0.0)) throw ConfigError("sta_polynomial: t_f must be positive");
  StaPolynomial p;
  p.tf = tf;
  p.d = d;
  p.omega_z = omega_z;
  p.c = classical_path_coefficients();
  // q0 = q_c + q_c'' / omega_z^2 term by term in s.
  for (int n = 3; n <= 9; ++n) {
    const double cn = n >= 5 ? p.c[n - 5] : 0.0;
    const double cn2 = n + 2 <= 9 ? p.c[n + 2 - 5] : 0.0;
    p.b_const[n - 3] = cn;
    p.b_inverse[n - 3] = (n + 2.0) * (n + 1.0) * cn2;
  }
  const double inv = 1.0 / ((tf * omega_z) * (tf * omega_z));
  for (int i = 0; i < 7; ++i) p.b[i] = p.b_const[i] + p.b_inverse[i] * inv;
  return p;
}

// ---------------------------------------------------------------------------
// eSTA correction basis f(alpha; t) = sum_k alpha_k f_k(t)

/// Rows n = 3..11, columns k = 1..6.
using FCoefficients = std::array<std::array<double, 6>, 9>;

/// Reference coefficient values, rounded to about eight significant digits.
inline constexpr FCoefficients kTabulatedFCoefficients = {{
    {3268.0278, -1764.7350, 1361.6782, -1021.2587, 705.89400, -544.67130},
    {-42974.565, 29382.838, -24260.567, 18791.160, -13235.513, 10339.677},
    {238311.85, -188292.32, 168031.09, -135594.78, 97923.184, -77792.678},
    {-731080.51, 636579.13, -607620.55, 512478.95, -381148.45, 309119.12},
    {1362055.0, -1270967.0, 1282059.8, -1128042.6, 865989.78, -719297.45},
    {-1583096.2, 1555055.1, -1640810.9, 1500138.2, -1188990.2, 1013733.1},
    {1124047.2, -1148396.4, 1257158.1, -1189045.8, 971849.37, -851598.11},
    {-446816.56, 470792.08, -531275.79, 517653.33, -435482.68, 392326.73},
    {76285.754, -82388.614, 95357.192, -95357.192, 82388.614, -76285.754},
}};

/// Solves, for each k, the 9x9 system on the basis s^3..s^11:
///   f_k(j/7) = delta_jk (j = 1..6),  f_k(1) = f_k'(1) = f_k''(1) = 0.
/// Vanishing value, slope and curvature at s = 0 come from the basis.
inline FCoefficients solve_f_coefficients() {
  using Mat = Eigen::Matrix<long double, 9, 9>;
  Mat m;
  for (int j = 0; j < 9; ++j) {
    const int n = j + 3;
    for (int node = 1; node <= 6; ++node) m(node - 1, j) = std::pow(node / 7.0L, n);
    m(6, j) = 1;
    m(7, j) = n;
    m(8, j) = static_cast<long double>(n) * (n - 1);
  }
  const auto lu = m.fullPivLu();
  if (!lu.isInvertible()) throw NumericsError("solve_f_coefficients: singular node system");
  FCoefficients out{};
  for (int k = 0; k < 6; ++k) {
    Eigen::Matrix<long double, 9, 1> rhs = Eigen::Matrix<long double, 9, 1>::Zero();
    rhs(k) = 1;
    const Eigen::Matrix<long double, 9, 1> x = lu.solve(rhs);
    for (int j = 0; j < 9; ++j) out[j][k] = static_cast<double>(x(j));
  }
  return out;
}

/// The six basis polynomials f_k(s) (the gradient of f with respect to alpha).
inline std::array<ReducedPolynomial, 6> f_basis(const FCoefficients& a) {
  std::array<ReducedPolynomial, 6> basis;
  for (int k = 0; k < 6; ++k) {
    std::vector<double> c(12, 0.0);
    for (int j = 0; j < 9; ++j) c[j + 3] = a[j][k];
    basis[k] = ReducedPolynomial(std::move(c));
  }
  return basis;
}

inline const FCoefficients& f_coefficients() {
  static const FCoefficients solved = solve_f_coefficients();
  return solved;
}

// ---------------------------------------------------------------------------
// Trap paths

class TrapPath {
 public:
  PathKind kind() const { return kind_; }
  double final_time() const { return tf_; }
  double distance() const { return d_; }
  double omega_z() const { return omega_z_; }
  const std::array<double, 6>& epsilon() const { return epsilon_; }

  double position(double t) const { return eval(t, 0); }
  double velocity(double t) const { return eval(t, 1); }
  double acceleration(double t) const { return eval(t, 2); }

  /// Polynomial paths carry the classical atom trajectory of the harmonic
  /// approximation, q_c'' + omega_z^2 (q_c - q0) = 0, q_c(0) = q_c'(0) = 0.
  bool has_classical_path() const { return kind_ == PathKind::STA || kind_ == PathKind::eSTA; }
  double classical_position(double t) const { return classical(t, 0); }
  double classical_velocity(double t) const { return classical(t, 1); }
  double classical_acceleration(double t) const { return classical(t, 2); }

  /// Times where q0'' jumps.
  std::vector<double> discontinuities() const {
    if (kind_ == PathKind::Triangle) return {tf_ / 2.0};
    return {};
  }

  const ReducedPolynomial& polynomial() const { return q0_; }

  static TrapPath polynomial_path(PathKind kind, double tf, double d, double omega_z,
                                  ReducedPolynomial q0, std::array<double, 6> epsilon = {}) {
    TrapPath p(kind, tf, d, omega_z);
    p.q0_ = std::move(q0);
    p.epsilon_ = epsilon;
    p.build_classical();
    return p;
  }

  static TrapPath sine(double tf, double d) { return TrapPath(PathKind::Sine, tf, d, 0.0); }
  static TrapPath triangle(double tf, double d) { return TrapPath(PathKind::Triangle, tf, d, 0.0); }

 private:
  TrapPath(PathKind kind, double tf, double d, double omega_z)
      : kind_(kind), tf_(tf), d_(d), omega_z_(omega_z) {}

  double eval(double t, int order) const {
    // The trap rests at 0 before the transport and at d after it.
    if (t < 0.0) return 0.0;
    if (t > tf_) return order == 0 ? d_ : 0.0;
    return eval_inside(t, order);
  }

  double eval_inside(double t, int order) const {
    const double v0 = 2.0 * d_ / tf_;
    switch (kind_) {
      case PathKind::STA:
      case PathKind::eSTA:
        return q0_.derivative(t / tf_, order) / std::pow(tf_, order);
      case PathKind::Sine: {
        const double w = 2.0 * std::numbers::pi / tf_;
        if (order == 0) return 0.5 * v0 * (t - std::sin(w * t) / w);
        if (order == 1) return 0.5 * v0 * (1.0 - std::cos(w * t));
        return 0.5 * v0 * w * std::sin(w * t);
      }
      case PathKind::Triangle: {
        const bool first = t <= tf_ / 2.0;
        if (first) {
          if (order == 0) return v0 * t * t / tf_;
          if (order == 1) return 2.0 * v0 * t / tf_;
          return 2.0 * v0 / tf_;
        }
        if (order == 0) return v0 * (2.0 * t - tf_ / 2.0 - t * t / tf_);
        if (order == 1) return v0 * (2.0 - 2.0 * t / tf_);
        return -2.0 * v0 / tf_;
      }
    }
    return 0.0;
  }

  // Particular solution r_p = sum_k (-1)^k (omega t_f)^{-2k} d^{2k}q0/ds^{2k}
  // plus the homogeneous part fixing q_c(0) = q_c'(0) = 0.
  void build_classical() {
    const double x2 = 1.0 / ((omega_z_ * tf_) * (omega_z_ * tf_));
    ReducedPolynomial acc = q0_;
    ReducedPolynomial term = q0_;
    double scale = 1.0;
    for (int k = 1; 2 * k <= q0_.degree(); ++k) {
      term = term.differentiated(2);
      scale *= -x2;
      ReducedPolynomial add = term;
      add *= scale;
      acc += add;
    }
    qc_ = acc;
    hom_cos_ = -qc_.derivative(0.0, 0);
    hom_sin_ = -qc_.derivative(0.0, 1) / tf_ / omega_z_;
  }

  double classical(double t, int order) const {
    if (!has_classical_path()) throw ConfigError("classical path is only defined for STA/eSTA");
    t = std::clamp(t, 0.0, tf_);
    const double w = omega_z_;
    const double c = std::cos(w * t), s = std::sin(w * t);
    const double poly = qc_.derivative(t / tf_, order) / std::pow(tf_, order);
    double hom = 0.0;
    if (order == 0) hom = hom_cos_ * c + hom_sin_ * s;
    if (order == 1) hom = w * (-hom_cos_ * s + hom_sin_ * c);
    if (order == 2) hom = -w * w * (hom_cos_ * c + hom_sin_ * s);
    return poly + hom;
  }

  PathKind kind_;
  double tf_, d_, omega_z_;
  ReducedPolynomial q0_;
  ReducedPolynomial qc_;
  double hom_cos_ = 0.0, hom_sin_ = 0.0;
  std::array<double, 6> epsilon_{};
};

inline TrapPath sta_path(const DerivedScales& s) {
  const auto sta = sta_polynomial(s.final_time, s.distance, s.omega_z);
  std::vector<double> c(10, 0.0);
  for (int n = 3; n <= 9; ++n) c[n] = s.distance * sta.b[n - 3];
  return TrapPath::polynomial_path(PathKind::STA, s.final_time, s.distance, s.omega_z,
                                   ReducedPolynomial(std::move(c)));
}

/// STA path plus the node-controlled correction f(epsilon; t).
inline TrapPath esta_path(const DerivedScales& s, std::span<const double> epsilon) {
  if (epsilon.size() != 6) throw ConfigError("esta_path: correction vector must have 6 components");
  const TrapPath base = sta_path(s);
  ReducedPolynomial q0 = base.polynomial();
  const auto& a = f_coefficients();
  std::vector<double> corr(12, 0.0);
  for (int j = 0; j < 9; ++j)
    for (int k = 0; k < 6; ++k) corr[j + 3] += a[j][k] * epsilon[k];
  q0 += ReducedPolynomial(std::move(corr));
  std::array<double, 6> eps{};
  std::copy(epsilon.begin(), epsilon.end(), eps.begin());
  return TrapPath::polynomial_path(PathKind::eSTA, s.final_time, s.distance, s.omega_z, std::move(q0), eps);
}

inline TrapPath sine_path(const DerivedScales& s) { return TrapPath::sine(s.final_time, s.distance); }
inline TrapPath triangle_path(const DerivedScales& s) { return TrapPath::triangle(s.final_time, s.distance); }

/// max_t |q_c''(t)| (polynomial paths) or max_t |q0''(t)| (sine, triangle):
/// dense scan followed by golden-section refinement around the best sample.
inline double max_atom_acceleration(const TrapPath& path) {
  const double tf = path.final_time();
  auto accel = [&](double t) {
    return std::abs(path.has_classical_path() ? path.classical_acceleration(t) : path.acceleration(t));
  };
  constexpr int samples = 10000;
  int best = 0;
  double best_val = -1.0;
  for (int i = 0; i <= samples; ++i) {
    const double v = accel(tf * i / samples);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double lo = tf * std::max(0, best - 1) / samples;
  double hi = tf * std::min(samples, best + 1) / samples;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = accel(x1), f2 = accel(x2);
  for (int it = 0; it < 100 && hi - lo > 1e-14 * tf; ++it) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = accel(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = accel(x2);
    }
  }
  return std::max({best_val, f1, f2});
}

}  // namespace ocb
