#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "alcc/data_io.hpp"
#include "alcc/environment.hpp"
#include "alcc/rng.hpp"

using namespace alcc;

namespace {

DriverPopulation single_driver_population(double v0, double T) {
  DriverPopulation pop;
  pop.entries.assign(1, {v0, T});
  pop.jitter_scale = 0.0;
  return pop;
}

EnvConfig quiet_config() {
  EnvConfig cfg;
  cfg.hdv_noise_max = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("reset places the chain at the population-mean equilibrium") {
  const DriverPopulation pop = single_driver_population(25.0, 1.2);
  Environment env(quiet_config(), pop);
  const IdmParams driver = make_idm_params(25.0, 1.2);

  SUBCASE("moving start") {
    const std::vector<double> pv(300, 10.0);
    const EnvState s = env.reset(pv, driver, 1);
    const double eq = idm_equilibrium_gap(make_idm_params(25.0, 1.2), 10.0);
    CHECK(s.v_pv == 10.0);
    CHECK(s.v_cav == 10.0);
    CHECK(s.v_hdv == 10.0);
    CHECK(s.gap_pv_cav == eq);
    CHECK(s.gap_cav_hdv == eq);
    CHECK(s.dv_pv_cav == 0.0);
    CHECK(s.dv_cav_hdv == 0.0);
  }

  SUBCASE("standstill start leaves the minimum gap") {
    const std::vector<double> pv(300, 0.0);
    const EnvState s = env.reset(pv, driver, 1);
    CHECK(s.gap_pv_cav == 2.0);
    CHECK(s.gap_cav_hdv == 2.0);
  }

  SUBCASE("same seed, same trajectory") {
    SyntheticProfileSpec spec;
    spec.seed = 3;
    const std::vector<double> pv = generate_synthetic_pv(spec);
    EnvConfig noisy;  // defaults keep the 0..5% noise active
    Environment env_a(noisy, pop);
    Environment env_b(noisy, pop);
    EnvState sa = env_a.reset(pv, driver, 42);
    EnvState sb = env_b.reset(pv, driver, 42);
    for (int k = 0; k < 100; ++k) {
      const StepOutcome oa = env_a.step(0.3);
      const StepOutcome ob = env_b.step(0.3);
      CHECK(oa.next_state.v_hdv == ob.next_state.v_hdv);
      CHECK(oa.next_state.gap_cav_hdv == ob.next_state.gap_cav_hdv);
      CHECK(oa.reward == ob.reward);
      sa = oa.next_state;
      sb = ob.next_state;
    }
    CHECK(sa.gap_pv_cav == sb.gap_pv_cav);
  }

  SUBCASE("short profiles are rejected") {
    const std::vector<double> pv(100, 10.0);
    CHECK_THROWS_AS(env.reset(pv, driver, 1), std::invalid_argument);
  }
}

TEST_CASE("time to collision sign conventions") {
  CHECK(ttc(20.0, 10.0 - 15.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(ttc(20.0, 15.0 - 10.0) == doctest::Approx(-4.0).epsilon(1e-15));
  CHECK(ttc(20.0, 0.0) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(ttc(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("reward terms match their closed forms") {
  const EnvConfig cfg = quiet_config();

  SUBCASE("safety") {
    CHECK(reward_safety(4.0, cfg) == 0.0);
    CHECK(reward_safety(0.4, cfg) ==
          doctest::Approx(std::log(0.1)).epsilon(1e-12));
    CHECK(reward_safety(-4.0, cfg) == 0.0);
    CHECK(reward_safety(std::numeric_limits<double>::infinity(), cfg) == 0.0);
  }

  SUBCASE("efficiency") {
    CHECK(reward_efficiency(20.0, 10.0, cfg) == 0.0);
    CHECK(reward_efficiency(25.0, 10.0, cfg) == -1.0);  // boundary included
    CHECK(reward_efficiency(5.0, 0.0, cfg) == -1.0);    // stopped CAV
  }

  SUBCASE("CAV energy") {
    CHECK(reward_cav(20000.0, cfg) == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(reward_cav(0.0, cfg) == 0.0);
    const double p = motor_power(cfg.energy, 10.0, 0.0);
    CHECK(reward_cav(p, cfg) == doctest::Approx(-0.0234610500).epsilon(1e-9));
  }

  SUBCASE("HDV energy uses the predicted acceleration") {
    CHECK(reward_hdv(0.0, 0.0, cfg) ==
          doctest::Approx(-110.3 / 20000.0 * 0.1).epsilon(1e-12));
    // hard predicted braking clamps the power polynomial to zero
    CHECK(reward_hdv(5.0, -3.0, cfg) == 0.0);
    // same (v, a) as a CAV call gives the same magnitude
    CHECK(reward_hdv(12.0, 0.7, cfg) ==
          reward_cav(motor_power(cfg.energy, 12.0, 0.7), cfg));
  }
}

TEST_CASE("HDV acceleration prediction") {
  const EnvConfig cfg = quiet_config();

  SUBCASE("warmup mean of a single entry is that entry's response") {
    const DriverPopulation pop = single_driver_population(24.0, 1.1);
    const double direct =
        idm_acceleration(make_idm_params(24.0, 1.1), 12.0, -1.0, 30.0);
    CHECK(predict_hdv_accel(std::nullopt, 12.0, -1.0, 30.0, pop, 3, cfg) ==
          direct);
  }

  SUBCASE("warmup mean of two entries averages the responses") {
    DriverPopulation pop;
    pop.entries = {{20.0, 1.0}, {28.0, 1.6}};
    const double r1 = idm_acceleration(make_idm_params(20.0, 1.0), 0.0, 0.0, 1e9);
    const double r2 = idm_acceleration(make_idm_params(28.0, 1.6), 0.0, 0.0, 1e9);
    CHECK(predict_hdv_accel(std::nullopt, 0.0, 0.0, 1e9, pop, 0, cfg) ==
          (r1 + r2) / 2.0);
  }

  SUBCASE("empty population is rejected") {
    DriverPopulation pop;
    CHECK_THROWS_AS(
        predict_hdv_accel(std::nullopt, 10.0, 0.0, 20.0, pop, 0, cfg),
        std::invalid_argument);
  }

  SUBCASE("after warmup the identified driver matches the true response") {
    const DriverPopulation pop = make_fixture_population(50, 5);
    Environment env(quiet_config(), pop);
    const IdmParams driver = make_idm_params(23.7, 1.15);
    SyntheticProfileSpec spec;
    spec.seed = 9;
    const std::vector<double> pv = generate_synthetic_pv(spec);
    const Controller replay = replay_controller(pv, 0.1);

    EnvState state = env.reset(pv, driver, 77);
    double worst = 0.0;
    for (int k = 0; k < 120 && !env.done(); ++k) {
      const StepOutcome out = env.step(replay(state, k));
      if (k >= 60) {
        worst =
            std::max(worst, std::abs(out.predicted_hdv_accel - out.hdv_accel));
      }
      state = out.next_state;
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("stepping the chain") {
  SUBCASE("IDM equilibrium is a fixed point of the kinematic update") {
    const DriverPopulation pop = single_driver_population(25.0, 1.2);
    Environment env(quiet_config(), pop);
    const std::vector<double> pv(301, 10.0);
    const EnvState init = env.reset(pv, make_idm_params(25.0, 1.2), 5);
    const double gap0 = init.gap_cav_hdv;
    EnvState s = init;
    for (int k = 0; k < 300; ++k) {
      const StepOutcome out = env.step(0.0);
      s = out.next_state;
      if (out.done) CHECK(out.reason == DoneReason::horizon);
    }
    CHECK(std::abs(s.gap_cav_hdv - gap0) < 1e-9);
    CHECK(std::abs(s.gap_pv_cav - gap0) < 1e-9);
    CHECK(std::abs(s.v_hdv - 10.0) < 1e-9);
  }

  SUBCASE("trapezoidal gap update is exact for constant acceleration") {
    const DriverPopulation pop = single_driver_population(25.0, 1.2);
    Environment env(quiet_config(), pop);
    const std::vector<double> pv(300, 15.0);
    const EnvState init = env.reset(pv, make_idm_params(25.0, 1.2), 5);
    const double gap0 = init.gap_pv_cav;
    EnvState s = init;
    for (int k = 0; k < 20; ++k) {
      const StepOutcome out = env.step(-1.0);
      // one-step trapezoid identity, recomputed bitwise
      CHECK(out.next_state.gap_pv_cav ==
            s.gap_pv_cav +
                0.5 * (s.dv_pv_cav + out.next_state.dv_pv_cav) * 0.1);
      s = out.next_state;
    }
    // closed form: the gap grows by a dt^2 K^2 / 2 under constant -1 m/s^2
    const double expected = gap0 + 0.5 * 1.0 * 0.01 * 20.0 * 20.0;
    CHECK(std::abs(s.gap_pv_cav - expected) < 1e-9);
  }

  SUBCASE("reference and proposed rewards differ by the HDV term") {
    const DriverPopulation pop = make_fixture_population(20, 8);
    EnvConfig ref_cfg;
    ref_cfg.reward_mode = RewardMode::reference;
    EnvConfig prop_cfg;
    prop_cfg.reward_mode = RewardMode::proposed;
    Environment env_ref(ref_cfg, pop);
    Environment env_prop(prop_cfg, pop);
    SyntheticProfileSpec spec;
    spec.seed = 21;
    const std::vector<double> pv = generate_synthetic_pv(spec);
    auto rng = make_rng(22);
    const IdmParams driver = sample_driver(pop, rng);
    env_ref.reset(pv, driver, 99);
    env_prop.reset(pv, driver, 99);
    for (int k = 0; k < 150; ++k) {
      const double action = 0.5 * std::sin(0.07 * k);
      const StepOutcome a = env_prop.step(action);
      const StepOutcome b = env_ref.step(action);
      CHECK(a.reward == b.reward + a.terms.hdv);
      CHECK(a.terms.hdv == b.terms.hdv);
      if (a.done || b.done) break;
    }
  }

  SUBCASE("out-of-bounds actions are clamped and flagged") {
    const DriverPopulation pop = single_driver_population(25.0, 1.2);
    Environment env(quiet_config(), pop);
    const std::vector<double> pv(300, 12.0);
    env.reset(pv, make_idm_params(25.0, 1.2), 5);
    const StepOutcome out = env.step(5.0);
    CHECK(out.applied_accel == 3.0);
    CHECK(out.action_clamped);
    const StepOutcome out2 = env.step(-2.0);
    CHECK_FALSE(out2.action_clamped);
  }

  SUBCASE("driving into the leader terminates with the penalty") {
    const DriverPopulation pop = single_driver_population(25.0, 1.2);
    Environment env(quiet_config(), pop);
    const std::vector<double> pv(300, 5.0);
    env.reset(pv, make_idm_params(25.0, 1.2), 5);
    bool collided = false;
    for (int k = 0; k < 300 && !env.done(); ++k) {
      const StepOutcome out = env.step(3.0);
      if (out.done && out.reason == DoneReason::collision) {
        collided = true;
        const double recomposed = out.terms.safety + out.terms.efficiency +
                                  out.terms.cav + out.terms.hdv - 10.0;
        CHECK(out.reward == recomposed);
      }
    }
    CHECK(collided);
    CHECK_THROWS_AS(env.step(0.0), std::logic_error);
  }

  SUBCASE("rewards are penalties: every term is non-positive") {
    const DriverPopulation pop = make_fixture_population(30, 44);
    EnvConfig cfg;  // noise on
    Environment env(cfg, pop);
    auto rng = make_rng(45);
    for (int episode = 0; episode < 3; ++episode) {
      SyntheticProfileSpec spec;
      spec.seed = 300 + episode;
      const std::vector<double> pv = generate_synthetic_pv(spec);
      env.reset(pv, sample_driver(pop, rng), 400 + episode);
      while (!env.done()) {
        const StepOutcome out = env.step(uniform(rng, -3.0, 3.0));
        CHECK(out.terms.safety <= 0.0);
        CHECK((out.terms.efficiency == 0.0 || out.terms.efficiency == -1.0));
        CHECK(out.terms.cav <= 0.0);
        CHECK(out.terms.hdv <= 0.0);
        if (out.reason != DoneReason::collision) {
          const double recomposed = out.terms.safety + out.terms.efficiency +
                                    out.terms.cav + out.terms.hdv;
          CHECK(out.reward == recomposed);
        }
      }
    }
  }
}
