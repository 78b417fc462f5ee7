#ifndef ALCC_VEHICLE_MODELS_HPP
#define ALCC_VEHICLE_MODELS_HPP

#include <span>

namespace alcc {

/// Longitudinal dynamics constants of a mid-size electric passenger car.
struct VehicleParams {
  double mass = 1005.0;                     // kg
  double drag_coefficient = 0.3;            // -
  double frontal_area = 2.02;               // m^2
  double rolling_resistance = 0.015;        // -
  double air_density = 1.206;               // kg/m^3
  double gravity = 9.81;                    // m/s^2
  double rotational_inertia_coeff = 1.02;   // -
  double road_grade = 0.0;                  // rad, fixed 0 here

  void validate() const;
};

VehicleParams default_vehicle_params();

/// Polynomial motor-demand-power model: P(v,a) = sum p[i][j] v^i a^j,
/// i in 0..3, j in 0..2. Coefficients in W per (m/s)^i (m/s^2)^j.
struct EnergyCoefficients {
  double p[4][3] = {};
  // When set, motor_power() floors the polynomial at zero (no regeneration
  // credit); disable to study the signed polynomial directly.
  bool clamp_negative = true;
};

EnergyCoefficients default_energy_coefficients();

/// Intelligent Driver Model preference parameters.
struct IdmParams {
  double max_accel = 1.0;       // a, m/s^2
  double desired_speed = 25.0;  // v0, m/s
  double accel_exponent = 4.0;  // delta, -
  double min_gap = 2.0;         // s0, m
  double time_gap = 1.5;        // T, s
  double comfort_decel = 1.5;   // b, m/s^2

  void validate() const;
};

/// The IDM constants held fixed while (v0, T) carry the driver diversity.
struct IdmFixedConstants {
  double max_accel = 1.0;
  double comfort_decel = 1.5;
  double min_gap = 2.0;
  double accel_exponent = 4.0;
};

IdmParams make_idm_params(double desired_speed, double time_gap,
                          const IdmFixedConstants& fixed = {});

namespace idm_bounds {
inline constexpr double v0_min = 1.0;
inline constexpr double v0_max = 40.0;
inline constexpr double T_min = 0.1;
inline constexpr double T_max = 5.0;
}  // namespace idm_bounds

/// Driving force needed for (speed, accel) on a flat road, N.
double traction_force(const VehicleParams& params, double speed, double accel);

/// Raw power polynomial, W (may be negative under strong braking).
double motor_power_raw(const EnergyCoefficients& coeffs, double speed,
                       double accel);

/// Demand power, W; floored at zero unless coeffs.clamp_negative is off.
double motor_power(const EnergyCoefficients& coeffs, double speed,
                   double accel);

/// Left-endpoint sum of motor_power over a sampled trajectory, J.
double trip_energy(const EnergyCoefficients& coeffs,
                   std::span<const double> speeds,
                   std::span<const double> accels, double dt);

/// IDM response, m/s^2. approach_rate is follower speed minus leader speed.
double idm_acceleration(const IdmParams& p, double speed, double approach_rate,
                        double gap);

/// Gap at which idm_acceleration is zero for a steady speed below v0, m.
double idm_equilibrium_gap(const IdmParams& p, double speed);

}  // namespace alcc

#endif
