#include "alcc/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "alcc/parallel.hpp"
#include "alcc/rng.hpp"

namespace alcc {

int observation_width(RewardMode mode) {
  return mode == RewardMode::proposed ? 7 : 4;
}

std::vector<double> observe(const EnvState& s, RewardMode mode,
                            const Normalization& norm) {
  if (mode == RewardMode::proposed) {
    return {s.v_pv / norm.speed_scale,      s.v_cav / norm.speed_scale,
            s.v_hdv / norm.speed_scale,     s.dv_pv_cav / norm.relspeed_scale,
            s.dv_cav_hdv / norm.relspeed_scale, s.gap_pv_cav / norm.gap_scale,
            s.gap_cav_hdv / norm.gap_scale};
  }
  return {s.v_pv / norm.speed_scale, s.v_cav / norm.speed_scale,
          s.dv_pv_cav / norm.relspeed_scale, s.gap_pv_cav / norm.gap_scale};
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("buffer capacity must be > 0");
  storage_.resize(capacity);
}

void ReplayBuffer::push(Transition t) {
  storage_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

const Transition& ReplayBuffer::at(std::size_t logical) const {
  if (logical >= size_) throw std::out_of_range("replay buffer index");
  const std::size_t oldest = (head_ + capacity_ - size_) % capacity_;
  return storage_[(oldest + logical) % capacity_];
}

void ReplayBuffer::sample_indices(std::mt19937_64& rng, std::size_t batch,
                                  std::vector<std::size_t>& out) const {
  if (size_ == 0) throw std::logic_error("sampling from an empty buffer");
  out.resize(batch);
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  for (auto& idx : out) idx = pick(rng);
}

void DdpgConfig::validate() const {
  if (gamma <= 0.0 || gamma > 1.0)
    throw std::invalid_argument("gamma must lie in (0, 1]");
  if (batch_size <= 0 ||
      static_cast<std::size_t>(batch_size) > buffer_capacity)
    throw std::invalid_argument("batch size must lie in [1, capacity]");
  if (tau < 0.0 || tau > 1.0)
    throw std::invalid_argument("tau must lie in [0, 1]");
  if (episodes < 0) throw std::invalid_argument("episodes must be >= 0");
  if (update_every <= 0)
    throw std::invalid_argument("update cadence must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("need hidden layers");
}

double DdpgConfig::sigma_at(int episode) const {
  const double span = sigma_decay_fraction * episodes;
  if (span <= 0.0 || episode >= span) return sigma_final;
  return sigma_initial +
         (sigma_final - sigma_initial) * static_cast<double>(episode) / span;
}

Agent make_agent(RewardMode mode, const DdpgConfig& cfg) {
  cfg.validate();
  Agent agent;
  agent.mode = mode;
  agent.cfg = cfg;

  const int obs = observation_width(mode);
  NetworkSpec actor_spec;
  actor_spec.widths.push_back(obs);
  for (int h : cfg.hidden) actor_spec.widths.push_back(h);
  actor_spec.widths.push_back(1);
  actor_spec.output = OutputActivation::tanh;
  actor_spec.init_seed = derive_seed(cfg.seed, {stream::init, 1});

  NetworkSpec critic_spec = actor_spec;
  critic_spec.widths.front() = obs + 1;
  critic_spec.output = OutputActivation::identity;
  critic_spec.init_seed = derive_seed(cfg.seed, {stream::init, 2});

  agent.actor = make_network(actor_spec);
  agent.critic = make_network(critic_spec);
  agent.target_actor = agent.actor;
  agent.target_critic = agent.critic;
  agent.opt_actor = make_optimizer_state(agent.actor);
  agent.opt_critic = make_optimizer_state(agent.critic);
  return agent;
}

Policy to_policy(const Agent& agent) {
  return Policy{agent.mode, agent.norm, agent.actor};
}

namespace {

double policy_accel(const Network& actor, const Normalization& norm,
                    std::span<const double> obs) {
  return norm.action_scale * forward(actor, obs)[0];
}

// Fixed-size blocks keep gradient summation order independent of the
// worker count, so updates are bit-reproducible at any parallelism.
constexpr std::size_t kGradBlock = 32;

void zero_fill(ParamSet& grads) {
  for (auto& g : grads) {
    std::fill(g.w.begin(), g.w.end(), 0.0);
    std::fill(g.b.begin(), g.b.end(), 0.0);
  }
}

// lazily shaped per-block buffers, reused across updates
void prepare_scratch(std::vector<ParamSet>& scratch, const Network& net,
                     std::size_t blocks) {
  if (scratch.size() < blocks) scratch.resize(blocks);
  for (std::size_t bi = 0; bi < blocks; ++bi) {
    if (scratch[bi].size() != net.layers.size())
      scratch[bi] = zero_gradients(net);
    else
      zero_fill(scratch[bi]);
  }
}

void reduce_partials(std::vector<ParamSet>& partials, std::size_t blocks) {
  for (std::size_t bi = 1; bi < blocks; ++bi) {
    for (std::size_t l = 0; l < partials[0].size(); ++l) {
      auto& acc = partials[0][l];
      const auto& part = partials[bi][l];
      for (std::size_t i = 0; i < acc.w.size(); ++i) acc.w[i] += part.w[i];
      for (std::size_t i = 0; i < acc.b.size(); ++i) acc.b[i] += part.b[i];
    }
  }
}

}  // namespace

double select_action(const Policy& policy, std::span<const double> observation,
                     double sigma, std::mt19937_64& rng) {
  double accel = policy_accel(policy.actor, policy.norm, observation);
  if (sigma > 0.0) accel += normal(rng, 0.0, sigma);
  return std::clamp(accel, -policy.norm.action_scale, policy.norm.action_scale);
}

double update_critic(Agent& agent, std::span<const Transition* const> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const double n = static_cast<double>(batch.size());
  const std::size_t blocks = (batch.size() + kGradBlock - 1) / kGradBlock;

  prepare_scratch(agent.critic_scratch, agent.critic, blocks);
  std::vector<double> partial_loss(blocks, 0.0);

  parallel_for(blocks, agent.cfg.workers, [&](std::size_t bi) {
    ParamSet& grads = agent.critic_scratch[bi];
    double loss = 0.0;
    ForwardCache cache, target_cache;
    std::vector<double> critic_in;
    const std::size_t lo = bi * kGradBlock;
    const std::size_t hi = std::min(batch.size(), lo + kGradBlock);
    for (std::size_t s = lo; s < hi; ++s) {
      const Transition& t = *batch[s];
      double y = t.reward;
      if (!t.done) {
        forward_into(agent.target_actor, t.next_state, target_cache);
        const double next_action = target_cache.scalar();
        critic_in.assign(t.next_state.begin(), t.next_state.end());
        critic_in.push_back(next_action);
        forward_into(agent.target_critic, critic_in, target_cache);
        y += agent.cfg.gamma * target_cache.scalar();
      }
      critic_in.assign(t.state.begin(), t.state.end());
      critic_in.push_back(t.action);
      forward_into(agent.critic, critic_in, cache);
      const double err = cache.scalar() - y;
      loss += err * err / n;
      const double upstream[1] = {2.0 * err / n};
      backward(agent.critic, cache, upstream, grads);
    }
    partial_loss[bi] = loss;
  });

  reduce_partials(agent.critic_scratch, blocks);
  double loss = 0.0;
  for (std::size_t bi = 0; bi < blocks; ++bi) loss += partial_loss[bi];

  OptimizerConfig opt;
  opt.kind = agent.cfg.optimizer;
  opt.learning_rate = agent.cfg.lr_critic;
  optimizer_step(agent.critic, agent.critic_scratch[0], agent.opt_critic, opt);
  return loss;
}

double update_actor(Agent& agent, std::span<const Transition* const> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const double n = static_cast<double>(batch.size());
  const std::size_t blocks = (batch.size() + kGradBlock - 1) / kGradBlock;

  prepare_scratch(agent.actor_scratch, agent.actor, blocks);
  std::vector<double> partial_q(blocks, 0.0);

  parallel_for(blocks, agent.cfg.workers, [&](std::size_t bi) {
    ParamSet& grads = agent.actor_scratch[bi];
    double mean_q = 0.0;
    ForwardCache actor_cache;
    ForwardCache critic_cache;
    std::vector<double> critic_in;
    const std::size_t lo = bi * kGradBlock;
    const std::size_t hi = std::min(batch.size(), lo + kGradBlock);
    for (std::size_t s = lo; s < hi; ++s) {
      const Transition& t = *batch[s];
      forward_into(agent.actor, t.state, actor_cache);
      critic_in.assign(t.state.begin(), t.state.end());
      critic_in.push_back(actor_cache.scalar());
      forward_into(agent.critic, critic_in, critic_cache);
      mean_q += critic_cache.scalar() / n;
      const double upstream_q[1] = {1.0};
      const std::vector<double> dq_dinput =
          backward_input(agent.critic, critic_cache, upstream_q);
      // ascend mean Q: minimize its negation through the actor
      const double upstream_actor[1] = {-dq_dinput.back() / n};
      backward(agent.actor, actor_cache, upstream_actor, grads);
    }
    partial_q[bi] = mean_q;
  });

  reduce_partials(agent.actor_scratch, blocks);
  double mean_q = 0.0;
  for (std::size_t bi = 0; bi < blocks; ++bi) mean_q += partial_q[bi];

  OptimizerConfig opt;
  opt.kind = agent.cfg.optimizer;
  opt.learning_rate = agent.cfg.lr_actor;
  optimizer_step(agent.actor, agent.actor_scratch[0], agent.opt_actor, opt);
  return mean_q;
}

std::string done_reason_name(DoneReason reason) {
  switch (reason) {
    case DoneReason::horizon: return "horizon";
    case DoneReason::collision: return "collision";
    default: return "none";
  }
}

TrainResult train(const EnvConfig& env_cfg, const DriverPopulation& population,
                  const PvSource& pv_source, const DdpgConfig& cfg) {
  cfg.validate();
  TrainResult result;
  result.agent = make_agent(env_cfg.reward_mode, cfg);
  Agent& agent = result.agent;

  Environment env(env_cfg, population);
  ReplayBuffer buffer(cfg.buffer_capacity);
  auto sample_rng = make_rng(derive_seed(cfg.seed, {stream::buffer}));
  std::vector<std::size_t> indices;
  std::vector<const Transition*> batch;

  double rolling_sum = 0.0;
  std::vector<double> recent;  // trailing window of episode rewards

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    auto driver_rng = make_rng(derive_seed(cfg.seed, {stream::driver,
                                                      static_cast<std::uint64_t>(episode)}));
    auto noise_rng = make_rng(derive_seed(cfg.seed, {stream::action,
                                                     static_cast<std::uint64_t>(episode)}));
    const IdmParams driver = sample_driver(population, driver_rng);

    double episode_reward = 0.0;
    DoneReason reason = DoneReason::horizon;
    try {
      const std::vector<double>& pv = pv_source(episode);
      EnvState state = env.reset(
          pv, driver,
          derive_seed(cfg.seed, {stream::env, static_cast<std::uint64_t>(episode)}));
      const double sigma = cfg.sigma_at(episode);

      for (int t = 0; !env.done(); ++t) {
        std::vector<double> obs = observe(state, agent.mode, agent.norm);
        double accel = policy_accel(agent.actor, agent.norm, obs);
        if (sigma > 0.0) accel += normal(noise_rng, 0.0, sigma);
        accel = std::clamp(accel, env_cfg.accel_min, env_cfg.accel_max);

        const StepOutcome outcome = env.step(accel);
        episode_reward += outcome.reward;
        reason = outcome.reason;

        Transition tr;
        tr.state = std::move(obs);
        tr.action = outcome.applied_accel / agent.norm.action_scale;
        tr.reward = outcome.reward;
        tr.next_state = observe(outcome.next_state, agent.mode, agent.norm);
        tr.done = outcome.done;
        buffer.push(std::move(tr));
        state = outcome.next_state;

        if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size) &&
            t % cfg.update_every == 0) {
          buffer.sample_indices(sample_rng, cfg.batch_size, indices);
          batch.clear();
          for (std::size_t idx : indices) batch.push_back(&buffer.at(idx));
          update_critic(agent, batch);
          update_actor(agent, batch);
          soft_update(agent.target_critic, agent.critic, cfg.tau);
          soft_update(agent.target_actor, agent.actor, cfg.tau);
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("training episode " + std::to_string(episode) +
                               ": " + e.what());
    }

    recent.push_back(episode_reward);
    rolling_sum += episode_reward;
    if (recent.size() > 100) {
      rolling_sum -= recent[recent.size() - 101];
    }
    const std::size_t window = std::min<std::size_t>(recent.size(), 100);

    EpisodeLog log;
    log.episode = episode;
    log.reward = episode_reward;
    log.rolling_mean = rolling_sum / static_cast<double>(window);
    log.driver_v0 = driver.desired_speed;
    log.driver_T = driver.time_gap;
    log.reason = reason;
    result.log.push_back(log);
  }
  return result;
}

}  // namespace alcc
