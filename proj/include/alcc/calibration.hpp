#ifndef ALCC_CALIBRATION_HPP
#define ALCC_CALIBRATION_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alcc/vehicle_models.hpp"

namespace alcc {

/// A ~30 s leader/follower record at 10 Hz, the calibration unit.
struct CarFollowingEpisode {
  double dt = 0.1;
  std::vector<double> leader_speed;    // m/s
  std::vector<double> follower_speed;  // observed, m/s
  double initial_gap = 0.0;            // m
  std::string id;

  void validate() const;
};

struct FollowerSim {
  std::vector<double> speed;
  bool collided = false;
  std::size_t collision_step = 0;
};

/// Forward-simulates the follower against the recorded leader profile
/// (Euler speeds, trapezoid gap). Stops early and flags when the gap closes.
FollowerSim simulate_idm_follower(const IdmParams& p,
                                  const CarFollowingEpisode& episode);

/// Root mean square percentage error between two speed series.
double rmspe(std::span<const double> simulated, std::span<const double> observed);

/// Fitness assigned to candidates whose simulation collides; worse than any
/// physically reachable RMSPE.
inline constexpr double kCollisionFitness = 10.0;

enum class GaMode { local, global };

struct GaConfig {
  int population_size = 50;
  // Generation budget of the 2-parameter (local) search; other modes scale
  // it by nvars/2, mirroring per-variable budgets of common GA tooling.
  int generations = 100;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  double mutation_sigma = 0.1;  // fraction of each bound range
  std::uint64_t seed = 0;
  GaMode mode = GaMode::local;
  IdmFixedConstants fixed;

  void validate() const;
  int effective_generations() const;
};

struct EpisodeFit {
  std::string episode_id;
  IdmParams params;
  double fitness = 0.0;
  std::vector<double> best_per_generation;
  std::uint64_t evaluations = 0;  // deterministic work measure
};

/// GA fit of one episode. The seed covers the whole run; results are
/// reproducible and independent of scheduling.
EpisodeFit calibrate_episode(const CarFollowingEpisode& episode,
                             const GaConfig& cfg, std::uint64_t seed);

/// Per-episode GA over a corpus; episodes are independent work items.
std::vector<EpisodeFit> ga_calibrate(
    const std::vector<CarFollowingEpisode>& episodes, const GaConfig& cfg,
    int workers = 1);

/// Empirical joint (v0, T) distribution of calibrated drivers.
struct DriverPopulation {
  std::vector<std::pair<double, double>> entries;  // (v0, T)
  double jitter_scale = 0.0;
  IdmFixedConstants fixed;

  double mean_v0() const;
  double mean_T() const;
  double std_v0() const;
  double std_T() const;
  double pearson() const;
  IdmParams mean_driver() const;
  void validate() const;
};

/// Joint draw with optional Gaussian jitter, clamped to the IDM bounds.
IdmParams sample_driver(const DriverPopulation& pop, std::mt19937_64& rng);

/// Synthetic stand-in for a field-calibrated population: n jointly
/// distributed (v0, T) pairs with Pearson correlation near 0.24.
DriverPopulation make_fixture_population(std::size_t n, std::uint64_t seed);

struct OnlineFit {
  double desired_speed = 0.0;
  double time_gap = 0.0;
};

/// Fits (v0, T) to a streaming window by grid search plus Nelder-Mead
/// refinement. Needs at least 50 samples (5 s at 10 Hz).
OnlineFit fit_online(std::span<const double> observed_speeds,
                     std::span<const double> leader_speeds,
                     std::span<const double> gaps,
                     const DriverPopulation& prior);

}  // namespace alcc

#endif
