#ifndef ALCC_EVALUATION_HPP
#define ALCC_EVALUATION_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "alcc/calibration.hpp"
#include "alcc/ddpg.hpp"
#include "alcc/environment.hpp"

namespace alcc {

/// Maps the raw environment state to a CAV acceleration (m/s^2).
using Controller = std::function<double(const EnvState&, int step)>;

Controller network_controller(const Policy& policy);

/// Replays the PV speed profile (the CAV mirrors the PV exactly).
Controller replay_controller(const std::vector<double>& pv_profile, double dt);

/// Everything one episode produced, for traces and energy accounting.
struct EpisodeRollout {
  std::vector<double> v_pv, v_cav, v_hdv;      // at step start
  std::vector<double> a_cav, a_hdv;            // applied during the step
  std::vector<double> gap_pv_cav, gap_cav_hdv; // at step start
  RewardTerms terms_sum;
  std::vector<RewardTerms> terms;
  std::vector<double> reward;
  double total_reward = 0.0;
  double cav_energy = 0.0;  // J
  double hdv_energy = 0.0;  // J
  bool collided = false;
  int steps = 0;
};

EpisodeRollout roll_episode(const EnvConfig& cfg,
                            const DriverPopulation& population,
                            const IdmParams& driver,
                            const std::vector<double>& pv_profile,
                            const Controller& controller, std::uint64_t seed);

/// HDV following the PV directly (no CAV in between).
struct TwoVehicleResult {
  double hdv_energy = 0.0;
  bool collided = false;
};

TwoVehicleResult roll_two_vehicle(const EnvConfig& cfg, const IdmParams& driver,
                                  const std::vector<double>& pv_profile,
                                  std::uint64_t seed);

struct EpisodeEnergy {
  double cav = 0.0;
  double hdv = 0.0;
  bool collided = false;
};

/// One seeded episode per driver under the given policy, learning disabled.
std::vector<EpisodeEnergy> evaluate_policy(const Policy& policy,
                                           const std::vector<IdmParams>& drivers,
                                           const DriverPopulation& population,
                                           const EnvConfig& cfg,
                                           const std::vector<double>& pv_profile,
                                           bool noise, std::uint64_t seed,
                                           int workers = 1);

struct DriverRecord {
  double driver_v0 = 0.0;
  double driver_T = 0.0;
  double cav_a = 0.0, hdv_a = 0.0, total_a = 0.0;
  double cav_b = 0.0, hdv_b = 0.0, total_b = 0.0;
  bool collided = false;          // in either condition
  double improvement_pct = 0.0;   // of the compared quantity, b relative
};

struct EvalSummary {
  std::size_t drivers = 0;
  std::size_t collisions = 0;  // excluded from the means below
  double mean_improvement = 0.0;
  double min_improvement = 0.0;
  double max_improvement = 0.0;
  double fraction_positive = 0.0;
  double fraction_negative = 0.0;
  double mean_cav_a = 0.0, mean_hdv_a = 0.0, mean_total_a = 0.0;
  double mean_cav_b = 0.0, mean_hdv_b = 0.0, mean_total_b = 0.0;
};

struct EvalReport {
  std::string condition_a;
  std::string condition_b;
  std::string compared;  // "hdv" or "total"
  std::vector<DriverRecord> records;
  EvalSummary summary;
};

EvalSummary summarize(const std::vector<DriverRecord>& records);

/// Scenario A (PV -> CAV -> HDV, CAV under the policy) against Scenario B
/// (HDV follows the PV directly); compares HDV trip energy.
EvalReport compare_scenarios(const Policy& policy,
                             const std::vector<IdmParams>& drivers,
                             const DriverPopulation& population,
                             const EnvConfig& cfg,
                             const std::vector<double>& pv_profile, bool noise,
                             std::uint64_t seed, int workers = 1);

/// Proposed against reference control; compares total (CAV+HDV) energy.
EvalReport compare_strategies(const Policy& proposed, const Policy& reference,
                              const std::vector<IdmParams>& drivers,
                              const DriverPopulation& population,
                              const EnvConfig& cfg,
                              const std::vector<double>& pv_profile, bool noise,
                              std::uint64_t seed, int workers = 1);

/// compare_strategies across held-out PV profiles.
std::vector<EvalReport> generalization_suite(
    const Policy& proposed, const Policy& reference,
    const std::vector<IdmParams>& drivers, const DriverPopulation& population,
    const EnvConfig& cfg, const std::vector<std::vector<double>>& pv_profiles,
    bool noise, std::uint64_t seed, int workers = 1);

}  // namespace alcc

#endif
