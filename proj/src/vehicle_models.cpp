#include "alcc/vehicle_models.hpp"

#include <cmath>
#include <stdexcept>

namespace alcc {

void VehicleParams::validate() const {
  if (mass <= 0.0) throw std::invalid_argument("vehicle mass must be > 0");
  if (frontal_area <= 0.0)
    throw std::invalid_argument("frontal area must be > 0");
  if (air_density <= 0.0) throw std::invalid_argument("air density must be > 0");
  if (rotational_inertia_coeff < 1.0)
    throw std::invalid_argument("rotational inertia coefficient must be >= 1");
}

VehicleParams default_vehicle_params() { return VehicleParams{}; }

EnergyCoefficients default_energy_coefficients() {
  EnergyCoefficients c;
  c.p[0][0] = 110.3;
  c.p[1][0] = 422.9;
  c.p[0][1] = 1213.0;
  c.p[2][0] = -0.0279;
  c.p[1][1] = 2484.0;
  c.p[0][2] = 2911.0;
  c.p[3][0] = 0.3557;
  c.p[2][1] = 1.374;
  c.p[1][2] = 25.19;
  return c;
}

void IdmParams::validate() const {
  if (max_accel <= 0.0 || desired_speed <= 0.0 || accel_exponent <= 0.0 ||
      min_gap <= 0.0 || time_gap <= 0.0 || comfort_decel <= 0.0) {
    throw std::invalid_argument("IDM parameters must be strictly positive");
  }
}

IdmParams make_idm_params(double desired_speed, double time_gap,
                          const IdmFixedConstants& fixed) {
  IdmParams p;
  p.max_accel = fixed.max_accel;
  p.desired_speed = desired_speed;
  p.accel_exponent = fixed.accel_exponent;
  p.min_gap = fixed.min_gap;
  p.time_gap = time_gap;
  p.comfort_decel = fixed.comfort_decel;
  p.validate();
  return p;
}

double traction_force(const VehicleParams& params, double speed, double accel) {
  if (speed < 0.0) throw std::invalid_argument("speed must be >= 0");
  const double rolling =
      params.mass * params.gravity * params.rolling_resistance;
  const double drag = 0.5 * params.drag_coefficient * params.frontal_area *
                      params.air_density * speed * speed;
  return params.rotational_inertia_coeff * params.mass * accel + rolling + drag;
}

double motor_power_raw(const EnergyCoefficients& coeffs, double speed,
                       double accel) {
  if (speed < 0.0) throw std::invalid_argument("speed must be >= 0");
  double power = 0.0;
  double vi = 1.0;
  for (int i = 0; i <= 3; ++i) {
    double aj = 1.0;
    for (int j = 0; j <= 2; ++j) {
      power += coeffs.p[i][j] * vi * aj;
      aj *= accel;
    }
    vi *= speed;
  }
  return power;
}

double motor_power(const EnergyCoefficients& coeffs, double speed,
                   double accel) {
  const double power = motor_power_raw(coeffs, speed, accel);
  if (coeffs.clamp_negative && power < 0.0) return 0.0;
  return power;
}

double trip_energy(const EnergyCoefficients& coeffs,
                   std::span<const double> speeds,
                   std::span<const double> accels, double dt) {
  if (speeds.size() != accels.size())
    throw std::invalid_argument("speed and accel series lengths differ");
  if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  double energy = 0.0;
  for (std::size_t k = 0; k < speeds.size(); ++k) {
    energy += motor_power(coeffs, speeds[k], accels[k]) * dt;
  }
  return energy;
}

double idm_acceleration(const IdmParams& p, double speed, double approach_rate,
                        double gap) {
  if (gap <= 0.0) throw std::invalid_argument("gap must be > 0");
  if (speed < 0.0) throw std::invalid_argument("speed must be >= 0");
  const double dynamic =
      speed * p.time_gap +
      speed * approach_rate / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
  const double desired_gap = p.min_gap + std::max(0.0, dynamic);
  const double speed_term = std::pow(speed / p.desired_speed, p.accel_exponent);
  const double gap_term = desired_gap / gap;
  return p.max_accel * (1.0 - speed_term - gap_term * gap_term);
}

double idm_equilibrium_gap(const IdmParams& p, double speed) {
  if (speed < 0.0 || speed >= p.desired_speed)
    throw std::invalid_argument("equilibrium gap needs 0 <= speed < v0");
  const double speed_term = std::pow(speed / p.desired_speed, p.accel_exponent);
  return (p.min_gap + speed * p.time_gap) / std::sqrt(1.0 - speed_term);
}

}  // namespace alcc
