// Times the OpenMP kernels against their serial reference paths. The two
// paths are bit-identical by construction (see tests/test_parallel.cpp);
// this target reports what the parallelism buys.

#include <chrono>
#include <cstdio>
#include <vector>

#include "alcc/data_io.hpp"
#include "alcc/ddpg.hpp"
#include "alcc/evaluation.hpp"
#include "alcc/parallel.hpp"
#include "alcc/rng.hpp"

using namespace alcc;

namespace {

template <typename F>
double time_seconds(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void report(const char* name, double serial, double parallel, int workers) {
  std::printf("%-28s serial %8.3f s   %2d workers %8.3f s   speedup %.2fx\n",
              name, serial, workers, parallel, serial / parallel);
}

}  // namespace

int main() {
  const int workers = resolve_workers(0);
  std::printf("hardware workers: %d\n\n", workers);

  {
    std::vector<CarFollowingEpisode> corpus;
    for (int i = 0; i < 8; ++i) {
      SyntheticProfileSpec spec;
      spec.seed = 900 + i;
      corpus.push_back(
          make_synthetic_episode(18.0 + i, 0.8 + 0.15 * i, {}, spec, 910 + i)
              .episode);
    }
    GaConfig cfg;
    cfg.seed = 1;
    std::vector<EpisodeFit> serial_fits, parallel_fits;
    const double t_serial =
        time_seconds([&] { serial_fits = ga_calibrate(corpus, cfg, 1); });
    const double t_parallel =
        time_seconds([&] { parallel_fits = ga_calibrate(corpus, cfg, workers); });
    report("GA calibration (8 episodes)", t_serial, t_parallel, workers);
    if (serial_fits[0].fitness != parallel_fits[0].fitness)
      std::printf("  WARNING: serial and parallel fits diverged\n");
  }

  {
    const DriverPopulation pop = make_fixture_population(923, 2);
    auto rng = make_rng(3);
    std::vector<IdmParams> drivers;
    for (int i = 0; i < 64; ++i) drivers.push_back(sample_driver(pop, rng));
    DdpgConfig cfg;
    cfg.seed = 4;
    const Policy proposed = to_policy(make_agent(RewardMode::proposed, cfg));
    const Policy reference = to_policy(make_agent(RewardMode::reference, cfg));
    SyntheticProfileSpec spec;
    spec.seed = 5;
    const std::vector<double> pv = generate_synthetic_pv(spec);

    EvalReport serial_rep, parallel_rep;
    const double t_serial = time_seconds([&] {
      serial_rep = compare_strategies(proposed, reference, drivers, pop,
                                      EnvConfig{}, pv, true, 6, 1);
    });
    const double t_parallel = time_seconds([&] {
      parallel_rep = compare_strategies(proposed, reference, drivers, pop,
                                        EnvConfig{}, pv, true, 6, workers);
    });
    report("policy evaluation (64 drivers)", t_serial, t_parallel, workers);
    if (serial_rep.summary.mean_improvement !=
        parallel_rep.summary.mean_improvement)
      std::printf("  WARNING: serial and parallel reports diverged\n");
  }

  {
    DdpgConfig cfg;
    cfg.seed = 7;
    cfg.batch_size = 1024;
    Agent serial_agent = make_agent(RewardMode::proposed, cfg);
    serial_agent.cfg.workers = 1;
    Agent parallel_agent = make_agent(RewardMode::proposed, cfg);
    parallel_agent.cfg.workers = workers;

    auto rng = make_rng(8);
    std::vector<Transition> batch(cfg.batch_size);
    for (auto& t : batch) {
      t.state.resize(7);
      t.next_state.resize(7);
      for (double& v : t.state) v = uniform(rng, -1, 1);
      for (double& v : t.next_state) v = uniform(rng, -1, 1);
      t.action = uniform(rng, -1, 1);
      t.reward = uniform(rng, -1, 0);
    }
    std::vector<const Transition*> ptrs;
    for (const auto& t : batch) ptrs.push_back(&t);

    constexpr int kUpdates = 50;
    const double t_serial = time_seconds([&] {
      for (int i = 0; i < kUpdates; ++i) {
        update_critic(serial_agent, ptrs);
        update_actor(serial_agent, ptrs);
      }
    });
    const double t_parallel = time_seconds([&] {
      for (int i = 0; i < kUpdates; ++i) {
        update_critic(parallel_agent, ptrs);
        update_actor(parallel_agent, ptrs);
      }
    });
    report("DDPG updates (50 x 1024)", t_serial, t_parallel, workers);
    if (serial_agent.critic.layers[0].w != parallel_agent.critic.layers[0].w)
      std::printf("  WARNING: serial and parallel updates diverged\n");
  }

  return 0;
}
