#pragma once

// Unit system and derived physical scales of a conveyor-belt lattice.
//
// Internally everything is expressed in recoil units: hbar = 1, m = 1/2,
// k = 1, so that E_R = hbar^2 k^2 / (2m) = 1. Lengths are then measured in
// 1/k and times in hbar/E_R. User-facing quantities use the lattice's own
// reporting units: energies in E_R, lengths in l_z, times in tau_z.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "ocb/error.hpp"

namespace ocb {

inline constexpr double kHbar = 1.0;
inline constexpr double kMass = 0.5;
inline constexpr double kWavenumber = 1.0;
inline constexpr double kRecoilEnergy = kHbar * kHbar * kWavenumber * kWavenumber / (2.0 * kMass);

/// The five independent inputs, in reporting units (E_R, l_z, tau_z).
struct SystemParams {
  double depth_U0 = 100.0;      // E_R
  double distance_d = 85.0;     // l_z
  double final_time_tf = 10.0;  // tau_z
  double waist_x_w0 = 4.2e6;    // l_z
  double waist_y_w0 = 4.2e6;    // l_z
};

/// Quantities that follow from SystemParams. All values are in internal
/// recoil units unless the name says otherwise.
struct DerivedScales {
  double omega_x = 0, omega_y = 0, omega_z = 0;
  double rayleigh_x = 0, rayleigh_y = 0;
  double l_z = 0, l_x = 0, l_y = 0;
  double tau_z = 0;
  double recoil_E_R = kRecoilEnergy;
  double k_lz = 0;
  double a_max = 0;

  double depth = 0;       // U0
  double waist_x = 0;     // w_{x,0}
  double waist_y = 0;     // w_{y,0}
  double distance = 0;    // d
  double final_time = 0;  // t_f
  int fixed_point_iterations = 0;
};

inline void validate(const SystemParams& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string(name) + " must be a finite positive number");
  };
  positive(p.depth_U0, "depth_U0");
  positive(p.distance_d, "distance_d");
  positive(p.final_time_tf, "final_time_tf");
  positive(p.waist_x_w0, "waist_x_w0");
  positive(p.waist_y_w0, "waist_y_w0");
}

/// Longitudinal trap frequency for given depth and Rayleigh lengths.
inline double longitudinal_frequency(double depth, double rayleigh_x, double rayleigh_y) {
  const double k2 = kWavenumber * kWavenumber;
  return std::sqrt(depth / kMass *
                   (1.0 / (rayleigh_x * rayleigh_x) + 1.0 / (rayleigh_y * rayleigh_y) + 2.0 * k2));
}

inline double oscillator_length(double omega) { return std::sqrt(kHbar / (2.0 * kMass * omega)); }

/// Solves the l_z <-> omega_z circularity (waists are quoted in l_z, while
/// l_z depends on omega_z, which depends on the Rayleigh lengths) by
/// fixed-point iteration from the paraxial seed.
inline DerivedScales derive_scales(const SystemParams& p) {
  validate(p);
  DerivedScales s;
  s.depth = p.depth_U0 * kRecoilEnergy;
  const double k = kWavenumber;

  double omega = std::sqrt(2.0 * s.depth * k * k / kMass);
  double lz = oscillator_length(omega);
  double zrx = 0, zry = 0;
  bool converged = false;
  int it = 0;
  for (; it < 100; ++it) {
    lz = oscillator_length(omega);
    const double wx = p.waist_x_w0 * lz;
    const double wy = p.waist_y_w0 * lz;
    zrx = k * wx * wx / 2.0;
    zry = k * wy * wy / 2.0;
    const double next = longitudinal_frequency(s.depth, zrx, zry);
    if (!std::isfinite(next)) break;
    const double change = std::abs(next - omega) / next;
    omega = next;
    if (change < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NumericsError("omega_z fixed point did not converge (waists too small for the given depth)");

  s.fixed_point_iterations = it + 1;
  s.omega_z = omega;
  s.l_z = oscillator_length(omega);
  s.waist_x = p.waist_x_w0 * s.l_z;
  s.waist_y = p.waist_y_w0 * s.l_z;
  s.rayleigh_x = k * s.waist_x * s.waist_x / 2.0;
  s.rayleigh_y = k * s.waist_y * s.waist_y / 2.0;
  if (k * s.rayleigh_x <= 10.0 || k * s.rayleigh_y <= 10.0)
    throw ConfigError("paraxial condition k*Z_R > 10 violated");

  s.omega_x = std::sqrt(4.0 * s.depth / (kMass * s.waist_x * s.waist_x));
  s.omega_y = std::sqrt(4.0 * s.depth / (kMass * s.waist_y * s.waist_y));
  s.l_x = oscillator_length(s.omega_x);
  s.l_y = oscillator_length(s.omega_y);
  s.tau_z = 2.0 * std::numbers::pi / s.omega_z;
  s.k_lz = k * s.l_z;
  s.a_max = s.depth * k / kMass;
  s.distance = p.distance_d * s.l_z;
  s.final_time = p.final_time_tf * s.tau_z;
  return s;
}

/// Largest acceleration the tilted lattice can sustain before its local
/// minima disappear: U0 k / m.
inline double max_trap_acceleration(const DerivedScales& s) { return s.depth * kWavenumber / kMass; }

inline double max_trap_acceleration(const SystemParams& p) { return max_trap_acceleration(derive_scales(p)); }

enum class UnitRole { Energy, Length, Time, Velocity, Acceleration, Frequency };

inline UnitRole parse_unit_role(std::string_view name) {
  if (name == "energy") return UnitRole::Energy;
  if (name == "length") return UnitRole::Length;
  if (name == "time") return UnitRole::Time;
  if (name == "velocity") return UnitRole::Velocity;
  if (name == "acceleration") return UnitRole::Acceleration;
  if (name == "frequency") return UnitRole::Frequency;
  throw ConfigError("unknown unit role: " + std::string(name));
}

/// Size of one reporting unit of the given role, in internal units.
inline double unit_size(UnitRole role, const DerivedScales& s) {
  switch (role) {
    case UnitRole::Energy:
      return kRecoilEnergy;
    case UnitRole::Length:
      return s.l_z;
    case UnitRole::Time:
      return s.tau_z;
    case UnitRole::Velocity:
      return s.l_z / s.tau_z;
    case UnitRole::Acceleration:
      return s.l_z / (s.tau_z * s.tau_z);
    case UnitRole::Frequency:
      return 1.0 / s.tau_z;
  }
  throw ConfigError("unknown unit role");
}

inline double to_internal(double value, UnitRole role, const DerivedScales& s) {
  return value * unit_size(role, s);
}

inline double from_internal(double value, UnitRole role, const DerivedScales& s) {
  return value / unit_size(role, s);
}

/// Optional laboratory calibration. Pass-through metadata: the solver only
/// ever sees depth_U0.
struct PhysicalCalibration {
  double wavelength_lambda = 1064e-9;  // m
  double laser_power_P0 = 1.0;         // W
  double setup_constant_C = 0.0;       // J m^2 / W
  double atom_mass_kg = 1.443160648e-25;  // 87Rb
};

/// Lattice depth C P0 / (w_x w_y), converted to E_R.
inline double calibrated_depth(const PhysicalCalibration& cal, const DerivedScales& s) {
  constexpr double hbar_si = 1.054571817e-34;
  const double k_si = 2.0 * std::numbers::pi / cal.wavelength_lambda;
  const double recoil_si = hbar_si * hbar_si * k_si * k_si / (2.0 * cal.atom_mass_kg);
  const double wx_si = s.waist_x / k_si;  // internal lengths are in 1/k
  const double wy_si = s.waist_y / k_si;
  return cal.setup_constant_C * cal.laser_power_P0 / (wx_si * wy_si) / recoil_si;
}

inline bool calibration_consistent(const PhysicalCalibration& cal, const SystemParams& p,
                                   double rel_tol = 1e-9) {
  const auto s = derive_scales(p);
  return std::abs(calibrated_depth(cal, s) - p.depth_U0) <= rel_tol * p.depth_U0;
}

}  // namespace ocb
