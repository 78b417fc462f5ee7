#ifndef ALCC_ENVIRONMENT_HPP
#define ALCC_ENVIRONMENT_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "alcc/calibration.hpp"
#include "alcc/vehicle_models.hpp"

namespace alcc {

enum class RewardMode { proposed, reference };

struct EnvConfig {
  double dt = 0.1;                   // s
  int episode_steps = 300;
  double accel_min = -3.0;           // m/s^2
  double accel_max = 3.0;
  double ttc_threshold = 4.0;        // s
  double tg_threshold = 2.5;         // s
  double power_scale = 20000.0;      // W
  double hdv_noise_max = 0.05;       // xi upper bound
  int warmup_steps = 50;             // population predictor until here
  int refit_interval = 10;           // steps between online refits
  double collision_gap = 1.0;        // m
  double collision_penalty = -10.0;
  RewardMode reward_mode = RewardMode::proposed;
  EnergyCoefficients energy = default_energy_coefficients();

  void validate() const;
};

/// Kinematic state of the PV -> CAV -> HDV chain.
struct EnvState {
  double v_pv = 0.0;
  double v_cav = 0.0;
  double v_hdv = 0.0;
  double dv_pv_cav = 0.0;   // v_pv - v_cav
  double dv_cav_hdv = 0.0;  // v_cav - v_hdv
  double gap_pv_cav = 0.0;
  double gap_cav_hdv = 0.0;
};

struct RewardTerms {
  double safety = 0.0;
  double efficiency = 0.0;
  double cav = 0.0;
  double hdv = 0.0;
};

enum class DoneReason { none, horizon, collision };

struct StepOutcome {
  EnvState next_state;
  double reward = 0.0;
  RewardTerms terms;
  bool done = false;
  DoneReason reason = DoneReason::none;
  double applied_accel = 0.0;  // after clamping to the action bounds
  bool action_clamped = false;
  double hdv_accel = 0.0;            // executed (noisy) HDV acceleration
  double predicted_hdv_accel = 0.0;  // estimate feeding the HDV reward
};

/// Time-to-collision toward the front vehicle; dv is front minus rear speed.
/// Negative values mean an opening gap; +inf means no closing speed.
double ttc(double gap, double dv);

double reward_safety(double ttc_value, const EnvConfig& cfg);
double reward_efficiency(double gap_pv_cav, double v_cav, const EnvConfig& cfg);
double reward_cav(double power, const EnvConfig& cfg);
double reward_hdv(double v_hdv, double predicted_accel, const EnvConfig& cfg);

/// Expected HDV acceleration at the given kinematics: population-mean IDM
/// response during warmup, the online-identified driver afterwards.
double predict_hdv_accel(const std::optional<OnlineFit>& estimate, double v_hdv,
                         double approach_rate, double gap,
                         const DriverPopulation& population, int step_index,
                         const EnvConfig& cfg);

/// Single-owner episodic simulation of the three-vehicle chain.
class Environment {
 public:
  Environment(EnvConfig cfg, DriverPopulation population);

  EnvState reset(const std::vector<double>& pv_profile, const IdmParams& driver,
                 std::uint64_t seed);
  StepOutcome step(double cav_accel);

  const EnvState& state() const { return state_; }
  int step_index() const { return step_index_; }
  bool done() const { return done_; }
  const EnvConfig& config() const { return cfg_; }
  const DriverPopulation& population() const { return population_; }
  const IdmParams& driver() const { return driver_; }
  const std::optional<OnlineFit>& hdv_estimate() const { return estimate_; }

 private:
  void maybe_refit();

  EnvConfig cfg_;
  DriverPopulation population_;
  IdmParams driver_;
  std::vector<double> pv_profile_;
  EnvState state_;
  int step_index_ = 0;
  bool done_ = true;
  std::mt19937_64 rng_;
  std::optional<OnlineFit> estimate_;
  // per-step history since reset, for the online identification
  std::vector<double> hist_v_hdv_;
  std::vector<double> hist_v_cav_;
  std::vector<double> hist_gap_;
};

}  // namespace alcc

#endif
