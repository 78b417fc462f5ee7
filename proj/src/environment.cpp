#include "alcc/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "alcc/rng.hpp"

namespace alcc {

void EnvConfig::validate() const {
  if (dt <= 0.0) throw std::invalid_argument("env dt must be > 0");
  if (episode_steps <= 0)
    throw std::invalid_argument("episode length must be > 0");
  if (accel_min >= accel_max)
    throw std::invalid_argument("acceleration bounds out of order");
  if (ttc_threshold <= 0.0 || tg_threshold <= 0.0 || power_scale <= 0.0)
    throw std::invalid_argument("thresholds must be positive");
  if (hdv_noise_max < 0.0)
    throw std::invalid_argument("noise bound must be >= 0");
  if (warmup_steps < 0 || refit_interval <= 0)
    throw std::invalid_argument("invalid warmup/refit settings");
  if (collision_gap <= 0.0)
    throw std::invalid_argument("collision gap must be > 0");
}

double ttc(double gap, double dv) {
  if (gap <= 0.0) throw std::invalid_argument("ttc needs gap > 0");
  if (dv == 0.0) return std::numeric_limits<double>::infinity();
  return -gap / dv;
}

double reward_safety(double ttc_value, const EnvConfig& cfg) {
  if (ttc_value >= 0.0 && ttc_value <= cfg.ttc_threshold)
    return std::log(ttc_value / cfg.ttc_threshold);
  return 0.0;
}

double reward_efficiency(double gap_pv_cav, double v_cav,
                         const EnvConfig& cfg) {
  if (gap_pv_cav <= 0.0) throw std::invalid_argument("time gap needs gap > 0");
  // A stopped CAV holds an unbounded time gap; the throughput penalty fires.
  const double tg = v_cav > 0.0 ? gap_pv_cav / v_cav
                                : std::numeric_limits<double>::infinity();
  return tg >= cfg.tg_threshold ? -1.0 : 0.0;
}

double reward_cav(double power, const EnvConfig& cfg) {
  return -power / cfg.power_scale * cfg.dt;
}

double reward_hdv(double v_hdv, double predicted_accel, const EnvConfig& cfg) {
  return -motor_power(cfg.energy, v_hdv, predicted_accel) / cfg.power_scale *
         cfg.dt;
}

double predict_hdv_accel(const std::optional<OnlineFit>& estimate, double v_hdv,
                         double approach_rate, double gap,
                         const DriverPopulation& population, int step_index,
                         const EnvConfig& cfg) {
  population.validate();
  if (step_index >= cfg.warmup_steps && estimate.has_value()) {
    const IdmParams fitted = make_idm_params(
        estimate->desired_speed, estimate->time_gap, population.fixed);
    return idm_acceleration(fitted, v_hdv, approach_rate, gap);
  }
  double sum = 0.0;
  for (const auto& [v0, T] : population.entries) {
    sum += idm_acceleration(make_idm_params(v0, T, population.fixed), v_hdv,
                            approach_rate, gap);
  }
  return sum / static_cast<double>(population.entries.size());
}

Environment::Environment(EnvConfig cfg, DriverPopulation population)
    : cfg_(std::move(cfg)), population_(std::move(population)) {
  cfg_.validate();
  population_.validate();
}

EnvState Environment::reset(const std::vector<double>& pv_profile,
                            const IdmParams& driver, std::uint64_t seed) {
  if (static_cast<int>(pv_profile.size()) < cfg_.episode_steps)
    throw std::invalid_argument("PV profile shorter than the episode");
  driver.validate();
  driver_ = driver;
  pv_profile_ = pv_profile;
  rng_ = make_rng(derive_seed(seed, {stream::env}));
  step_index_ = 0;
  done_ = false;
  estimate_.reset();

  const double v0 = pv_profile_.front();
  const IdmParams mean = population_.mean_driver();
  double gap;
  if (v0 < mean.desired_speed) {
    gap = idm_equilibrium_gap(mean, v0);
  } else {
    gap = idm_equilibrium_gap(mean, 0.99 * mean.desired_speed);
  }
  // keep the start inside the feasible time-gap band (floored so a
  // standstill start still leaves the minimum gap)
  gap = std::min(gap, std::max(cfg_.tg_threshold * v0, mean.min_gap));

  state_ = EnvState{};
  state_.v_pv = v0;
  state_.v_cav = v0;
  state_.v_hdv = v0;
  state_.dv_pv_cav = 0.0;
  state_.dv_cav_hdv = 0.0;
  state_.gap_pv_cav = gap;
  state_.gap_cav_hdv = gap;

  hist_v_hdv_.assign(1, state_.v_hdv);
  hist_v_cav_.assign(1, state_.v_cav);
  hist_gap_.assign(1, state_.gap_cav_hdv);
  return state_;
}

void Environment::maybe_refit() {
  if (step_index_ < cfg_.warmup_steps) return;
  const bool due = step_index_ % cfg_.refit_interval == 0 || !estimate_;
  if (!due || hist_v_hdv_.size() < 50) return;
  estimate_ = fit_online(hist_v_hdv_, hist_v_cav_, hist_gap_, population_);
}

StepOutcome Environment::step(double cav_accel) {
  if (done_) throw std::logic_error("step() after the episode finished");

  StepOutcome out;
  out.applied_accel = std::clamp(cav_accel, cfg_.accel_min, cfg_.accel_max);
  out.action_clamped = out.applied_accel != cav_accel;

  maybe_refit();

  const double approach = state_.v_hdv - state_.v_cav;
  const double base_accel =
      idm_acceleration(driver_, state_.v_hdv, approach, state_.gap_cav_hdv);
  const double xi =
      cfg_.hdv_noise_max > 0.0 ? uniform(rng_, 0.0, cfg_.hdv_noise_max) : 0.0;
  out.hdv_accel = base_accel * (1.0 + xi);
  out.predicted_hdv_accel =
      predict_hdv_accel(estimate_, state_.v_hdv, approach, state_.gap_cav_hdv,
                        population_, step_index_, cfg_);

  const std::size_t last = pv_profile_.size() - 1;
  const double v_pv_next =
      pv_profile_[std::min<std::size_t>(step_index_ + 1, last)];
  const double v_cav_next =
      std::max(0.0, state_.v_cav + out.applied_accel * cfg_.dt);
  const double v_hdv_next = std::max(0.0, state_.v_hdv + out.hdv_accel * cfg_.dt);

  EnvState next;
  next.v_pv = v_pv_next;
  next.v_cav = v_cav_next;
  next.v_hdv = v_hdv_next;
  next.dv_pv_cav = v_pv_next - v_cav_next;
  next.dv_cav_hdv = v_cav_next - v_hdv_next;
  next.gap_pv_cav = state_.gap_pv_cav +
                    0.5 * (state_.dv_pv_cav + next.dv_pv_cav) * cfg_.dt;
  next.gap_cav_hdv = state_.gap_cav_hdv +
                     0.5 * (state_.dv_cav_hdv + next.dv_cav_hdv) * cfg_.dt;

  const bool collided = next.gap_pv_cav <= cfg_.collision_gap ||
                        next.gap_cav_hdv <= cfg_.collision_gap;

  out.terms.cav =
      reward_cav(motor_power(cfg_.energy, state_.v_cav, out.applied_accel), cfg_);
  out.terms.hdv = reward_hdv(state_.v_hdv, out.predicted_hdv_accel, cfg_);
  if (!collided) {
    out.terms.safety =
        reward_safety(ttc(next.gap_pv_cav, next.dv_pv_cav), cfg_);
    out.terms.efficiency =
        reward_efficiency(next.gap_pv_cav, next.v_cav, cfg_);
  } else {
    // interpenetrating states carry no meaningful TTC/TG; the terminal
    // penalty below covers them
    out.terms.safety = 0.0;
    out.terms.efficiency = 0.0;
  }

  out.reward = out.terms.safety + out.terms.efficiency + out.terms.cav;
  if (cfg_.reward_mode == RewardMode::proposed) out.reward += out.terms.hdv;

  ++step_index_;
  state_ = next;
  hist_v_hdv_.push_back(next.v_hdv);
  hist_v_cav_.push_back(next.v_cav);
  hist_gap_.push_back(next.gap_cav_hdv);

  if (collided) {
    out.reward += cfg_.collision_penalty;
    out.done = true;
    out.reason = DoneReason::collision;
  } else if (step_index_ >= cfg_.episode_steps) {
    out.done = true;
    out.reason = DoneReason::horizon;
  }
  done_ = out.done;
  out.next_state = next;
  return out;
}

}  // namespace alcc
