#pragma once

// Conveyor-belt potential: two counter-propagating Gaussian beams forming a
// standing wave along z. Wells are attractive, U_F(0,0,0) = -U0.

#include <cmath>

#include "ocb/scales.hpp"

namespace ocb {

enum class Axis { X, Y };

class Potential {
 public:
  explicit Potential(const DerivedScales& scales) : s_(scales) {}

  const DerivedScales& scales() const { return s_; }

  double waist_at(Axis axis, double z) const {
    const double w0 = axis == Axis::X ? s_.waist_x : s_.waist_y;
    const double zr = axis == Axis::X ? s_.rayleigh_x : s_.rayleigh_y;
    return w0 * std::sqrt(1.0 + (z / zr) * (z / zr));
  }

  /// Lattice depth at longitudinal position z (beam power spread over the
  /// local spot size).
  double depth_at(double z) const {
    return s_.depth * s_.waist_x * s_.waist_y / (waist_at(Axis::X, z) * waist_at(Axis::Y, z));
  }

  double full(double x, double y, double z) const {
    const double wx = waist_at(Axis::X, z);
    const double wy = waist_at(Axis::Y, z);
    const double c = std::cos(kWavenumber * z);
    const double envelope = std::exp(-2.0 * (x * x / (wx * wx) + y * y / (wy * wy)));
    return -s_.depth * s_.waist_x * s_.waist_y / (wx * wy) * c * c * envelope;
  }

  /// Potential of a lattice whose minimum sits at q0; the beam envelope moves
  /// with it.
  double full_shifted(double x, double y, double z, double q0) const { return full(x, y, z - q0); }

  double harmonic(double x, double y, double z) const {
    return -s_.depth + 0.5 * kMass *
                           (s_.omega_x * s_.omega_x * x * x + s_.omega_y * s_.omega_y * y * y +
                            s_.omega_z * s_.omega_z * z * z);
  }

  /// d/dz of full_shifted(x, y, z, q0), written as
  ///   U0 s E [k sin(2k z') + cos^2(k z') sum_i z' (1 - 4 x_i^2/w_i(z')^2) / (Z_i^2 + z'^2)]
  /// with z' = z - q0, s = w_x0 w_y0 / (w_x w_y) and E the transverse Gaussian.
  double dU_dz(double x, double y, double z, double q0) const {
    const double zp = z - q0;
    const double wx = waist_at(Axis::X, zp);
    const double wy = waist_at(Axis::Y, zp);
    const double spot = s_.waist_x * s_.waist_y / (wx * wy);
    const double envelope = std::exp(-2.0 * (x * x / (wx * wx) + y * y / (wy * wy)));
    const double k = kWavenumber;
    const double c = std::cos(k * zp);
    const double zrx2 = s_.rayleigh_x * s_.rayleigh_x;
    const double zry2 = s_.rayleigh_y * s_.rayleigh_y;
    const double curvature = zp * (1.0 - 4.0 * x * x / (wx * wx)) / (zrx2 + zp * zp) +
                             zp * (1.0 - 4.0 * y * y / (wy * wy)) / (zry2 + zp * zp);
    return s_.depth * spot * envelope * (k * std::sin(2.0 * k * zp) + c * c * curvature);
  }

 private:
  DerivedScales s_;
};

}  // namespace ocb
