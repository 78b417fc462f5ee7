#include "alcc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "alcc/parallel.hpp"
#include "alcc/rng.hpp"

namespace alcc {

Controller network_controller(const Policy& policy) {
  return [policy](const EnvState& state, int) {
    const std::vector<double> obs = observe(state, policy.mode, policy.norm);
    return policy.norm.action_scale * forward(policy.actor, obs)[0];
  };
}

Controller replay_controller(const std::vector<double>& pv_profile, double dt) {
  return [pv_profile, dt](const EnvState&, int step) {
    const std::size_t last = pv_profile.size() - 1;
    const std::size_t k = std::min<std::size_t>(step, last);
    const std::size_t k1 = std::min<std::size_t>(step + 1, last);
    return (pv_profile[k1] - pv_profile[k]) / dt;
  };
}

EpisodeRollout roll_episode(const EnvConfig& cfg,
                            const DriverPopulation& population,
                            const IdmParams& driver,
                            const std::vector<double>& pv_profile,
                            const Controller& controller, std::uint64_t seed) {
  Environment env(cfg, population);
  EnvState state = env.reset(pv_profile, driver, seed);

  EpisodeRollout out;
  while (!env.done()) {
    const int k = env.step_index();
    out.v_pv.push_back(state.v_pv);
    out.v_cav.push_back(state.v_cav);
    out.v_hdv.push_back(state.v_hdv);
    out.gap_pv_cav.push_back(state.gap_pv_cav);
    out.gap_cav_hdv.push_back(state.gap_cav_hdv);

    const StepOutcome step = env.step(controller(state, k));
    out.a_cav.push_back(step.applied_accel);
    out.a_hdv.push_back(step.hdv_accel);
    out.terms.push_back(step.terms);
    out.reward.push_back(step.reward);
    out.total_reward += step.reward;
    out.terms_sum.safety += step.terms.safety;
    out.terms_sum.efficiency += step.terms.efficiency;
    out.terms_sum.cav += step.terms.cav;
    out.terms_sum.hdv += step.terms.hdv;
    if (step.done && step.reason == DoneReason::collision) out.collided = true;
    state = step.next_state;
  }
  out.steps = env.step_index();
  out.cav_energy = trip_energy(cfg.energy, out.v_cav, out.a_cav, cfg.dt);
  out.hdv_energy = trip_energy(cfg.energy, out.v_hdv, out.a_hdv, cfg.dt);
  return out;
}

TwoVehicleResult roll_two_vehicle(const EnvConfig& cfg, const IdmParams& driver,
                                  const std::vector<double>& pv_profile,
                                  std::uint64_t seed) {
  cfg.validate();
  driver.validate();
  if (static_cast<int>(pv_profile.size()) < cfg.episode_steps)
    throw std::invalid_argument("PV profile shorter than the episode");
  // the same stream derivation as Environment::reset, so the xi sequence
  // matches the three-vehicle rollout for a given seed
  auto rng = make_rng(derive_seed(seed, {stream::env}));

  const double v0 = pv_profile.front();
  double gap;
  if (v0 < driver.desired_speed) {
    gap = idm_equilibrium_gap(driver, v0);
  } else {
    gap = idm_equilibrium_gap(driver, 0.99 * driver.desired_speed);
  }

  double v = v0;
  std::vector<double> speeds, accels;
  speeds.reserve(cfg.episode_steps);
  accels.reserve(cfg.episode_steps);
  TwoVehicleResult out;
  const std::size_t last = pv_profile.size() - 1;
  for (int k = 0; k < cfg.episode_steps; ++k) {
    const double v_lead = pv_profile[std::min<std::size_t>(k, last)];
    const double v_lead_next = pv_profile[std::min<std::size_t>(k + 1, last)];
    const double base = idm_acceleration(driver, v, v - v_lead, gap);
    const double xi =
        cfg.hdv_noise_max > 0.0 ? uniform(rng, 0.0, cfg.hdv_noise_max) : 0.0;
    const double accel = base * (1.0 + xi);
    speeds.push_back(v);
    accels.push_back(accel);
    const double v_next = std::max(0.0, v + accel * cfg.dt);
    gap += 0.5 * ((v_lead - v) + (v_lead_next - v_next)) * cfg.dt;
    v = v_next;
    if (gap <= cfg.collision_gap) {
      out.collided = true;
      break;
    }
  }
  out.hdv_energy = trip_energy(cfg.energy, speeds, accels, cfg.dt);
  return out;
}

std::vector<EpisodeEnergy> evaluate_policy(const Policy& policy,
                                           const std::vector<IdmParams>& drivers,
                                           const DriverPopulation& population,
                                           const EnvConfig& cfg,
                                           const std::vector<double>& pv_profile,
                                           bool noise, std::uint64_t seed,
                                           int workers) {
  EnvConfig run_cfg = cfg;
  run_cfg.reward_mode = policy.mode;
  if (!noise) run_cfg.hdv_noise_max = 0.0;
  const Controller controller = network_controller(policy);

  std::vector<EpisodeEnergy> out(drivers.size());
  parallel_for(drivers.size(), workers, [&](std::size_t i) {
    const EpisodeRollout roll =
        roll_episode(run_cfg, population, drivers[i], pv_profile, controller,
                     derive_seed(seed, {stream::eval, i}));
    out[i] = EpisodeEnergy{roll.cav_energy, roll.hdv_energy, roll.collided};
  });
  return out;
}

EvalSummary summarize(const std::vector<DriverRecord>& records) {
  EvalSummary s;
  s.drivers = records.size();
  s.min_improvement = std::numeric_limits<double>::infinity();
  s.max_improvement = -std::numeric_limits<double>::infinity();
  std::size_t valid = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  for (const auto& r : records) {
    if (r.collided) {
      ++s.collisions;
      continue;
    }
    ++valid;
    s.mean_improvement += r.improvement_pct;
    s.min_improvement = std::min(s.min_improvement, r.improvement_pct);
    s.max_improvement = std::max(s.max_improvement, r.improvement_pct);
    if (r.improvement_pct > 0.0) ++positive;
    if (r.improvement_pct < 0.0) ++negative;
    s.mean_cav_a += r.cav_a;
    s.mean_hdv_a += r.hdv_a;
    s.mean_total_a += r.total_a;
    s.mean_cav_b += r.cav_b;
    s.mean_hdv_b += r.hdv_b;
    s.mean_total_b += r.total_b;
  }
  if (valid > 0) {
    const double n = static_cast<double>(valid);
    s.mean_improvement /= n;
    s.fraction_positive = static_cast<double>(positive) / n;
    s.fraction_negative = static_cast<double>(negative) / n;
    s.mean_cav_a /= n;
    s.mean_hdv_a /= n;
    s.mean_total_a /= n;
    s.mean_cav_b /= n;
    s.mean_hdv_b /= n;
    s.mean_total_b /= n;
  } else {
    s.min_improvement = 0.0;
    s.max_improvement = 0.0;
  }
  return s;
}

EvalReport compare_scenarios(const Policy& policy,
                             const std::vector<IdmParams>& drivers,
                             const DriverPopulation& population,
                             const EnvConfig& cfg,
                             const std::vector<double>& pv_profile, bool noise,
                             std::uint64_t seed, int workers) {
  EnvConfig run_cfg = cfg;
  run_cfg.reward_mode = policy.mode;
  if (!noise) run_cfg.hdv_noise_max = 0.0;
  const Controller controller = network_controller(policy);

  EvalReport report;
  report.condition_a = "scenario-A (PV->CAV->HDV)";
  report.condition_b = "scenario-B (PV->HDV)";
  report.compared = "hdv";
  report.records.resize(drivers.size());
  parallel_for(drivers.size(), workers, [&](std::size_t i) {
    const std::uint64_t ep_seed = derive_seed(seed, {stream::eval, i});
    const EpisodeRollout a = roll_episode(run_cfg, population, drivers[i],
                                          pv_profile, controller, ep_seed);
    const TwoVehicleResult b =
        roll_two_vehicle(run_cfg, drivers[i], pv_profile, ep_seed);
    DriverRecord rec;
    rec.driver_v0 = drivers[i].desired_speed;
    rec.driver_T = drivers[i].time_gap;
    rec.cav_a = a.cav_energy;
    rec.hdv_a = a.hdv_energy;
    rec.total_a = a.cav_energy + a.hdv_energy;
    rec.cav_b = 0.0;
    rec.hdv_b = b.hdv_energy;
    rec.total_b = b.hdv_energy;
    rec.collided = a.collided || b.collided;
    rec.improvement_pct =
        rec.hdv_b != 0.0 ? (rec.hdv_b - rec.hdv_a) / rec.hdv_b * 100.0 : 0.0;
    report.records[i] = rec;
  });
  report.summary = summarize(report.records);
  return report;
}

EvalReport compare_strategies(const Policy& proposed, const Policy& reference,
                              const std::vector<IdmParams>& drivers,
                              const DriverPopulation& population,
                              const EnvConfig& cfg,
                              const std::vector<double>& pv_profile, bool noise,
                              std::uint64_t seed, int workers) {
  EnvConfig cfg_prop = cfg;
  cfg_prop.reward_mode = proposed.mode;
  EnvConfig cfg_ref = cfg;
  cfg_ref.reward_mode = reference.mode;
  if (!noise) {
    cfg_prop.hdv_noise_max = 0.0;
    cfg_ref.hdv_noise_max = 0.0;
  }
  const Controller ctl_prop = network_controller(proposed);
  const Controller ctl_ref = network_controller(reference);

  EvalReport report;
  report.condition_a = "proposed strategy";
  report.condition_b = "reference strategy";
  report.compared = "total";
  report.records.resize(drivers.size());
  parallel_for(drivers.size(), workers, [&](std::size_t i) {
    const std::uint64_t ep_seed = derive_seed(seed, {stream::eval, i});
    const EpisodeRollout a = roll_episode(cfg_prop, population, drivers[i],
                                          pv_profile, ctl_prop, ep_seed);
    const EpisodeRollout b = roll_episode(cfg_ref, population, drivers[i],
                                          pv_profile, ctl_ref, ep_seed);
    DriverRecord rec;
    rec.driver_v0 = drivers[i].desired_speed;
    rec.driver_T = drivers[i].time_gap;
    rec.cav_a = a.cav_energy;
    rec.hdv_a = a.hdv_energy;
    rec.total_a = a.cav_energy + a.hdv_energy;
    rec.cav_b = b.cav_energy;
    rec.hdv_b = b.hdv_energy;
    rec.total_b = b.cav_energy + b.hdv_energy;
    rec.collided = a.collided || b.collided;
    rec.improvement_pct =
        rec.total_b != 0.0 ? (rec.total_b - rec.total_a) / rec.total_b * 100.0
                           : 0.0;
    report.records[i] = rec;
  });
  report.summary = summarize(report.records);
  return report;
}

std::vector<EvalReport> generalization_suite(
    const Policy& proposed, const Policy& reference,
    const std::vector<IdmParams>& drivers, const DriverPopulation& population,
    const EnvConfig& cfg, const std::vector<std::vector<double>>& pv_profiles,
    bool noise, std::uint64_t seed, int workers) {
  if (pv_profiles.size() < 2)
    throw std::invalid_argument("generalization needs at least two profiles");
  std::vector<EvalReport> reports;
  reports.reserve(pv_profiles.size());
  for (std::size_t p = 0; p < pv_profiles.size(); ++p) {
    reports.push_back(compare_strategies(
        proposed, reference, drivers, population, cfg, pv_profiles[p], noise,
        derive_seed(seed, {stream::profile, p}), workers));
  }
  return reports;
}

}  // namespace alcc
