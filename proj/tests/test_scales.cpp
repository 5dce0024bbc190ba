#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ocb/scales.hpp"

using namespace ocb;

namespace {

SystemParams params(double u0, double w = 4.2e6) {
  SystemParams p;
  p.depth_U0 = u0;
  p.waist_x_w0 = w;
  p.waist_y_w0 = w;
  return p;
}

double paraxial_omega(double u0) { return std::sqrt(2.0 * u0 * kWavenumber * kWavenumber / kMass); }

}  // namespace

TEST(Scales, RecoilUnitsGiveUnitRecoilEnergy) { EXPECT_DOUBLE_EQ(kRecoilEnergy, 1.0); }

TEST(Scales, LargeWaistsMatchParaxialFrequency) {
  const auto s = derive_scales(params(60.0));
  EXPECT_NEAR(s.omega_z / paraxial_omega(60.0), 1.0, 1e-6);
}

TEST(Scales, FixedPointSatisfiesFrequencyRelation) {
  for (double u0 : {20.0, 100.0, 2610.0})
    for (double w : {50.0, 537.0, 4.2e6}) {
      const auto s = derive_scales(params(u0, w));
      const double rhs = s.depth / kMass *
                         (1.0 / (s.rayleigh_x * s.rayleigh_x) + 1.0 / (s.rayleigh_y * s.rayleigh_y) +
                          2.0 * kWavenumber * kWavenumber);
      EXPECT_NEAR(s.omega_z * s.omega_z / rhs, 1.0, 1e-12) << u0 << " " << w;
      // Rayleigh lengths follow from waists quoted in the converged l_z.
      EXPECT_NEAR(s.rayleigh_x, kWavenumber * std::pow(w * s.l_z, 2) / 2.0, 1e-12 * s.rayleigh_x);
    }
}

TEST(Scales, ParaxialCheckAndLimit) {
  const auto s = derive_scales(params(100.0, 200.0));
  const double parax = 2.0 * s.depth * kWavenumber * kWavenumber / kMass;
  EXPECT_LT(std::abs(s.omega_z * s.omega_z - parax) / (s.omega_z * s.omega_z), 0.02);
  const auto big = derive_scales(params(100.0));
  EXPECT_NEAR(kHbar * big.omega_z / kRecoilEnergy, 2.0 * std::sqrt(100.0), 1e-9);
}

TEST(Scales, LongitudinalLengthIdentityInParaxialLimit) {
  for (double u0 : {20.0, 85.0, 1500.0}) {
    const auto s = derive_scales(params(u0));
    EXPECT_NEAR(std::pow(s.k_lz, 4) * 4.0 * u0, 1.0, 1e-9);
  }
}

TEST(Scales, QuadruplingDepthHalvesPeriod) {
  const auto a = derive_scales(params(50.0));
  const auto b = derive_scales(params(200.0));
  EXPECT_NEAR(b.tau_z / a.tau_z, 0.5, 1e-9);
}

TEST(Scales, FrequencyIncreasesWithDepth) {
  double prev = 0.0;
  for (double u0 = 10.0; u0 <= 3000.0; u0 *= 1.7) {
    const double w = derive_scales(params(u0, 300.0)).omega_z;
    EXPECT_GT(w, prev);
    prev = w;
  }
}

TEST(Scales, ParaxialLimitErrorScalesWithRayleighLength) {
  // hbar omega_z / E_R - 2 sqrt(U0) is O((k Z_R)^-2): shrinking Z_R by 2
  // raises the deviation by about 4.
  const double u0 = 100.0;
  auto dev = [&](double w) {
    const auto s = derive_scales(params(u0, w));
    return std::abs(s.omega_z - 2.0 * std::sqrt(u0)) * std::pow(kWavenumber * s.rayleigh_x, 2);
  };
  EXPECT_NEAR(dev(100.0) / dev(100.0 * std::sqrt(2.0)), 1.0, 0.05);
}

TEST(Scales, MaxTrapAcceleration) {
  EXPECT_DOUBLE_EQ(max_trap_acceleration(params(20.0)), 40.0);
  EXPECT_DOUBLE_EQ(max_trap_acceleration(params(40.0)), 2.0 * max_trap_acceleration(params(20.0)));
  EXPECT_DOUBLE_EQ(derive_scales(params(20.0)).a_max, 40.0);
}

TEST(Scales, StaThresholdTime) {
  // |q_c''|max = 9.372 d/tf^2 reaches a_max at tf* = sqrt(9.372 d / a_max).
  const auto s = derive_scales(params(100.0));
  const double tstar = std::sqrt(9.372 * s.distance / s.a_max);
  EXPECT_NEAR(9.372 * s.distance / (tstar * tstar), s.a_max, 1e-12 * s.a_max);
  EXPECT_GT(tstar, 0.0);
}

TEST(Scales, UnitRoundTrip) {
  const auto s = derive_scales(params(100.0));
  for (auto role : {UnitRole::Energy, UnitRole::Length, UnitRole::Time, UnitRole::Velocity, UnitRole::Acceleration,
                    UnitRole::Frequency}) {
    const double x = 85.0;
    EXPECT_NEAR(from_internal(to_internal(x, role, s), role, s), x, 1e-14 * x);
  }
  EXPECT_DOUBLE_EQ(to_internal(1.0, UnitRole::Time, s), 2.0 * std::numbers::pi / s.omega_z);
  EXPECT_DOUBLE_EQ(to_internal(4.0, UnitRole::Time, s), 4.0 * s.tau_z);
  EXPECT_THROW(parse_unit_role("mass"), ConfigError);
  EXPECT_EQ(parse_unit_role("velocity"), UnitRole::Velocity);
}

TEST(Scales, DerivedInputsUseReportingUnits) {
  SystemParams p = params(100.0);
  p.distance_d = 85.0;
  p.final_time_tf = 4.0;
  const auto s = derive_scales(p);
  EXPECT_DOUBLE_EQ(s.distance, 85.0 * s.l_z);
  EXPECT_DOUBLE_EQ(s.final_time, 4.0 * s.tau_z);
  EXPECT_NEAR(s.l_x, std::sqrt(kHbar / (2.0 * kMass * s.omega_x)), 1e-15 * s.l_x);
}

TEST(Scales, RejectsInvalidInput) {
  SystemParams p;
  p.depth_U0 = -1.0;
  EXPECT_THROW(derive_scales(p), ConfigError);
  p = SystemParams{};
  p.final_time_tf = 0.0;
  EXPECT_THROW(derive_scales(p), ConfigError);
  p = SystemParams{};
  p.waist_x_w0 = std::nan("");
  EXPECT_THROW(derive_scales(p), ConfigError);
  // Waists of a few l_z give k Z_R below the paraxial bound.
  EXPECT_THROW(derive_scales(params(100.0, 2.0)), std::exception);
}

TEST(Scales, CalibrationIsConsistentWhenConstantMatches) {
  SystemParams p = params(100.0, 2000.0);
  const auto s = derive_scales(p);
  PhysicalCalibration cal;
  cal.setup_constant_C = 1.0;
  const double unit = calibrated_depth(cal, s);  // depth for C = 1
  cal.setup_constant_C = p.depth_U0 / unit;
  EXPECT_TRUE(calibration_consistent(cal, p));
  cal.setup_constant_C *= 1.01;
  EXPECT_FALSE(calibration_consistent(cal, p));
}
