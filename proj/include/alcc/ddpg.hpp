#ifndef ALCC_DDPG_HPP
#define ALCC_DDPG_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "alcc/calibration.hpp"
#include "alcc/environment.hpp"
#include "alcc/network.hpp"

namespace alcc {

/// Scales applied to raw kinematics before they enter a network.
struct Normalization {
  double speed_scale = 30.0;     // m/s
  double relspeed_scale = 10.0;  // m/s
  double gap_scale = 100.0;      // m
  double action_scale = 3.0;     // m/s^2; tanh output * action_scale = accel
};

int observation_width(RewardMode mode);
std::vector<double> observe(const EnvState& state, RewardMode mode,
                            const Normalization& norm);

struct Transition {
  std::vector<double> state;
  double action = 0.0;  // normalized, in [-1, 1]
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

/// FIFO ring of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t logical) const;  // 0 = oldest
  void sample_indices(std::mt19937_64& rng, std::size_t batch,
                      std::vector<std::size_t>& out) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::vector<Transition> storage_;
};

struct DdpgConfig {
  double gamma = 0.9;
  int batch_size = 1024;
  double lr_actor = 0.001;
  double lr_critic = 0.001;
  double tau = 0.005;
  double sigma_initial = 1.0;  // exploration noise, m/s^2
  double sigma_final = 0.05;
  double sigma_decay_fraction = 0.8;  // of the episode budget
  int episodes = 3000;
  int update_every = 1;  // environment steps per update pair
  std::size_t buffer_capacity = 20000;
  std::vector<int> hidden = {200, 100, 50};
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  int workers = 0;

  void validate() const;
  double sigma_at(int episode) const;
};

struct Agent {
  RewardMode mode = RewardMode::proposed;
  Normalization norm;
  DdpgConfig cfg;
  Network actor;
  Network critic;
  Network target_actor;
  Network target_critic;
  OptimizerState opt_actor;
  OptimizerState opt_critic;
  // reusable per-block gradient buffers; not part of the checkpoint
  std::vector<ParamSet> critic_scratch;
  std::vector<ParamSet> actor_scratch;
};

Agent make_agent(RewardMode mode, const DdpgConfig& cfg);

/// Read-only slice of an agent sufficient to drive a CAV.
struct Policy {
  RewardMode mode = RewardMode::proposed;
  Normalization norm;
  Network actor;
};

Policy to_policy(const Agent& agent);

/// Deterministic policy output plus Gaussian exploration, clamped to the
/// acceleration bounds. Returns m/s^2.
double select_action(const Policy& policy, std::span<const double> observation,
                     double sigma, std::mt19937_64& rng);

/// One critic descent step on the TD loss over the batch; returns the
/// pre-step loss.
double update_critic(Agent& agent, std::span<const Transition* const> batch);

/// One actor ascent step on mean Q(s, mu(s)); returns the pre-step mean Q.
double update_actor(Agent& agent, std::span<const Transition* const> batch);

struct EpisodeLog {
  int episode = 0;
  double reward = 0.0;
  double rolling_mean = 0.0;  // over the trailing 100 episodes
  double driver_v0 = 0.0;
  double driver_T = 0.0;
  DoneReason reason = DoneReason::horizon;
};

std::string done_reason_name(DoneReason reason);

struct TrainResult {
  Agent agent;
  std::vector<EpisodeLog> log;
};

using PvSource = std::function<const std::vector<double>&(int episode)>;

/// Full training loop: sample a driver, roll an episode with exploration,
/// store transitions, update once the buffer can fill a batch.
TrainResult train(const EnvConfig& env_cfg, const DriverPopulation& population,
                  const PvSource& pv_source, const DdpgConfig& cfg);

}  // namespace alcc

#endif
