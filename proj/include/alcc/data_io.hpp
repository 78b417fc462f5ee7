#ifndef ALCC_DATA_IO_HPP
#define ALCC_DATA_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "alcc/calibration.hpp"
#include "alcc/ddpg.hpp"
#include "alcc/environment.hpp"
#include "alcc/evaluation.hpp"
#include "alcc/vehicle_models.hpp"

namespace alcc {

/// Stand-in for a recorded leading-vehicle speed profile.
struct SyntheticProfileSpec {
  double duration = 30.0;   // s
  double dt = 0.1;          // s
  double speed_min = 5.0;   // m/s
  double speed_max = 25.0;  // m/s
  double smoothness = 3.0;  // noise correlation time, s
  double accel_limit = 2.5; // m/s^2
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mean-reverting smoothed random walk clamped into the speed band.
std::vector<double> generate_synthetic_pv(const SyntheticProfileSpec& spec);

struct GenDataConfig {
  int episodes = 50;
  int population_size = 923;
  double truth_v0_min = 15.0;  // truth draw band for fixture episodes
  double truth_v0_max = 30.0;
  double truth_T_min = 0.6;
  double truth_T_max = 2.5;
};

struct EvalRunConfig {
  int drivers = 100;
  int noise_seeds = 3;
  int heldout_profiles = 2;
};

struct SimRunConfig {
  double driver_v0 = 0.0;  // 0 means "sample from the population"
  double driver_T = 0.0;
};

struct Paths {
  std::string corpus = "corpus";
  std::string population = "population.csv";
  std::string checkpoint_proposed = "checkpoint_proposed.txt";
  std::string checkpoint_reference = "checkpoint_reference.txt";
};

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 0;  // <= 0: all hardware threads
  VehicleParams vehicle;
  EnergyCoefficients energy = default_energy_coefficients();
  IdmFixedConstants idm;
  GaConfig ga;
  bool ga_compare_modes = false;
  EnvConfig env;
  DdpgConfig ddpg;
  SyntheticProfileSpec pv;
  GenDataConfig gen;
  EvalRunConfig eval;
  SimRunConfig sim;
  Paths paths;
};

/// Key-value text config; unknown keys and malformed values are errors.
RunConfig load_run_config(const std::string& path);
void set_config_value(RunConfig& cfg, const std::string& key,
                      const std::string& value);
/// Every key with its effective value, for provenance.
void echo_config(const RunConfig& cfg, std::ostream& os);

/// Lossless (round-trippable) decimal rendering of a double.
std::string format_double(double value);

struct SyntheticEpisode {
  CarFollowingEpisode episode;
  std::vector<double> gaps;  // aligned with the speed series
  double truth_v0 = 0.0;
  double truth_T = 0.0;
};

/// Leader profile plus a noiseless IDM follower with known (v0, T).
SyntheticEpisode make_synthetic_episode(double truth_v0, double truth_T,
                                        const IdmFixedConstants& fixed,
                                        const SyntheticProfileSpec& profile,
                                        std::uint64_t seed);

void write_episode_csv(const std::string& path, double dt,
                       const std::vector<double>& leader,
                       const std::vector<double>& follower,
                       const std::vector<double>& gaps);

/// Loads every *.csv under dir (sorted by name). Per-file problems are
/// reported to diagnostics and skipped; an empty result is an error.
std::vector<CarFollowingEpisode> load_episodes(const std::string& dir,
                                               std::ostream& diagnostics);

void save_population_csv(const DriverPopulation& pop, const std::string& path);
DriverPopulation load_population_csv(const std::string& path);

void save_checkpoint(const Agent& agent, const std::string& path);
Agent load_checkpoint(const std::string& path);

void write_training_log(const std::vector<EpisodeLog>& log,
                        const std::string& path);

void write_trace_csv(const EpisodeRollout& roll, double dt,
                     const std::string& path);

void write_eval_report_csv(const EvalReport& report, const std::string& path);
void write_eval_summary(const EvalReport& report, std::ostream& os);

void write_calibration_summary(const std::vector<EpisodeFit>& fits,
                               const std::string& mode_name,
                               const std::string& path);

}  // namespace alcc

#endif
