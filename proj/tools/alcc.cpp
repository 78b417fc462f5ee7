#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "alcc/data_io.hpp"
#include "alcc/ddpg.hpp"
#include "alcc/evaluation.hpp"
#include "alcc/rng.hpp"

namespace fs = std::filesystem;
using namespace alcc;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "alcc-out";
  std::string mode = "proposed";
  std::int64_t seed = -1;  // -1: keep the config value
  int episodes = -1;       // -1: keep the config value
  int workers = -9999;     // sentinel: keep the config value
  bool no_noise = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_mode,
                bool with_episodes, bool with_noise, bool with_workers) {
  cmd->add_option("--config", flags.config_path, "run configuration file");
  cmd->add_option("--seed", flags.seed, "global random seed");
  cmd->add_option("--out", flags.out_dir, "output directory");
  if (with_workers)
    cmd->add_option("--workers", flags.workers, "worker threads (0 = all)");
  if (with_mode)
    cmd->add_option("--mode", flags.mode, "control strategy")
        ->check(CLI::IsMember({"proposed", "reference"}));
  if (with_episodes)
    cmd->add_option("--episodes", flags.episodes, "episode count override");
  if (with_noise)
    cmd->add_flag("--no-noise", flags.no_noise,
                  "disable the 0..5% HDV actuation noise");
}

struct Context {
  RunConfig cfg;
  fs::path out;
  RewardMode mode = RewardMode::proposed;
};

Context make_context(const CommonFlags& flags) {
  Context ctx;
  if (!flags.config_path.empty()) ctx.cfg = load_run_config(flags.config_path);
  if (flags.seed >= 0) ctx.cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.workers != -9999) ctx.cfg.workers = flags.workers;
  if (flags.no_noise) ctx.cfg.env.hdv_noise_max = 0.0;
  ctx.mode = flags.mode == "reference" ? RewardMode::reference
                                       : RewardMode::proposed;

  // wire the shared pieces into the per-module configs
  ctx.cfg.env.energy = ctx.cfg.energy;
  ctx.cfg.ga.fixed = ctx.cfg.idm;
  ctx.cfg.ga.seed = ctx.cfg.seed;
  ctx.cfg.ddpg.seed = ctx.cfg.seed;
  ctx.cfg.ddpg.workers = ctx.cfg.workers;

  ctx.out = flags.out_dir;
  fs::create_directories(ctx.out);
  {
    std::ofstream echo(ctx.out / "effective-config.txt");
    echo_config(ctx.cfg, echo);
  }
  std::cout << "seed: " << ctx.cfg.seed << "\n";
  return ctx;
}

fs::path resolve(const Context& ctx, const std::string& configured) {
  const fs::path p(configured);
  return p.is_absolute() ? p : ctx.out / p;
}

// the training PV profile; evaluation reuses it and holds profiles out by index
std::vector<double> pv_profile(const Context& ctx, std::uint64_t index) {
  SyntheticProfileSpec spec = ctx.cfg.pv;
  spec.seed = derive_seed(ctx.cfg.seed, {stream::profile, index});
  return generate_synthetic_pv(spec);
}

DriverPopulation load_population(const Context& ctx) {
  DriverPopulation pop =
      load_population_csv(resolve(ctx, ctx.cfg.paths.population).string());
  pop.fixed = ctx.cfg.idm;
  return pop;
}

Policy load_policy(const Context& ctx, RewardMode expected) {
  const std::string path =
      resolve(ctx, expected == RewardMode::proposed
                        ? ctx.cfg.paths.checkpoint_proposed
                        : ctx.cfg.paths.checkpoint_reference)
          .string();
  Agent agent = load_checkpoint(path);
  if (agent.mode != expected)
    throw std::runtime_error(
        path + ": checkpoint mode does not match the " +
        (expected == RewardMode::proposed ? "proposed" : "reference") +
        " slot (state width mismatch)");
  return to_policy(agent);
}

int run_gen_data(const CommonFlags& flags) {
  Context ctx = make_context(flags);
  if (flags.episodes > 0) ctx.cfg.gen.episodes = flags.episodes;
  const auto& gen = ctx.cfg.gen;

  const fs::path corpus_dir = resolve(ctx, ctx.cfg.paths.corpus);
  fs::create_directories(corpus_dir);
  for (int i = 0; i < gen.episodes; ++i) {
    auto rng = make_rng(derive_seed(
        ctx.cfg.seed, {stream::corpus, static_cast<std::uint64_t>(i)}));
    const double v0 = uniform(rng, gen.truth_v0_min, gen.truth_v0_max);
    const double T = uniform(rng, gen.truth_T_min, gen.truth_T_max);
    const SyntheticEpisode ep = make_synthetic_episode(
        v0, T, ctx.cfg.idm, ctx.cfg.pv,
        derive_seed(ctx.cfg.seed,
                    {stream::corpus, static_cast<std::uint64_t>(i), 7}));
    char name[32];
    std::snprintf(name, sizeof(name), "ep_%04d.csv", i);
    write_episode_csv((corpus_dir / name).string(), ep.episode.dt,
                      ep.episode.leader_speed, ep.episode.follower_speed,
                      ep.gaps);
  }

  const DriverPopulation pop =
      make_fixture_population(gen.population_size, ctx.cfg.seed);
  save_population_csv(pop, resolve(ctx, ctx.cfg.paths.population).string());

  std::cout << "wrote " << gen.episodes << " episodes to " << corpus_dir
            << "\n";
  std::cout << "wrote " << pop.entries.size() << " drivers to "
            << resolve(ctx, ctx.cfg.paths.population) << "\n";
  return 0;
}

int run_calibrate(const CommonFlags& flags) {
  Context ctx = make_context(flags);
  const fs::path corpus_dir = resolve(ctx, ctx.cfg.paths.corpus);
  const auto episodes = load_episodes(corpus_dir.string(), std::cerr);
  std::cout << "loaded " << episodes.size() << " episodes\n";

  struct ModeRun {
    std::string name;
    GaMode mode;
  };
  std::vector<ModeRun> runs{
      {ctx.cfg.ga.mode == GaMode::local ? "local" : "global", ctx.cfg.ga.mode}};
  if (ctx.cfg.ga_compare_modes)
    runs = {{"local", GaMode::local}, {"global", GaMode::global}};

  std::vector<EpisodeFit> population_fits;
  for (const auto& run : runs) {
    GaConfig ga = ctx.cfg.ga;
    ga.mode = run.mode;
    const auto start = std::chrono::steady_clock::now();
    const auto fits = ga_calibrate(episodes, ga, ctx.cfg.workers);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    double mean_fitness = 0.0;
    std::uint64_t evals = 0;
    for (const auto& f : fits) {
      mean_fitness += f.fitness;
      evals += f.evaluations;
    }
    mean_fitness /= static_cast<double>(fits.size());
    std::cout << run.name << " mode: mean RMSPE " << mean_fitness << ", "
              << evals << " fitness evaluations, " << elapsed << " s\n";
    write_calibration_summary(
        fits, run.name,
        (ctx.out / ("calibration_" + run.name + ".csv")).string());
    if (run.mode == ctx.cfg.ga.mode) population_fits = fits;
  }

  DriverPopulation pop;
  pop.jitter_scale = 0.05;
  pop.fixed = ctx.cfg.idm;
  for (const auto& fit : population_fits)
    pop.entries.emplace_back(fit.params.desired_speed, fit.params.time_gap);
  save_population_csv(pop, resolve(ctx, ctx.cfg.paths.population).string());
  std::cout << "wrote " << pop.entries.size() << " calibrated drivers to "
            << resolve(ctx, ctx.cfg.paths.population) << "\n";
  return 0;
}

int run_train(const CommonFlags& flags) {
  Context ctx = make_context(flags);
  ctx.cfg.env.reward_mode = ctx.mode;
  DdpgConfig ddpg = ctx.cfg.ddpg;
  if (flags.episodes > 0) ddpg.episodes = flags.episodes;

  const DriverPopulation pop = load_population(ctx);
  const std::vector<double> pv = pv_profile(ctx, 0);
  const PvSource source = [&pv](int) -> const std::vector<double>& {
    return pv;
  };

  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = train(ctx.cfg.env, pop, source, ddpg);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  const std::string mode_name =
      ctx.mode == RewardMode::proposed ? "proposed" : "reference";
  const std::string checkpoint =
      resolve(ctx, ctx.mode == RewardMode::proposed
                        ? ctx.cfg.paths.checkpoint_proposed
                        : ctx.cfg.paths.checkpoint_reference)
          .string();
  save_checkpoint(result.agent, checkpoint);
  write_training_log(result.log,
                     (ctx.out / ("train_log_" + mode_name + ".csv")).string());

  std::cout << "trained " << result.log.size() << " episodes (" << mode_name
            << ") in " << elapsed << " s\n";
  if (!result.log.empty())
    std::cout << "final rolling mean reward: "
              << result.log.back().rolling_mean << "\n";
  std::cout << "checkpoint: " << checkpoint << "\n";
  return 0;
}

int run_evaluate(const CommonFlags& flags) {
  Context ctx = make_context(flags);
  const bool noise = !flags.no_noise;
  const Policy proposed = load_policy(ctx, RewardMode::proposed);
  const Policy reference = load_policy(ctx, RewardMode::reference);
  const DriverPopulation pop = load_population(ctx);

  auto driver_rng = make_rng(derive_seed(ctx.cfg.seed, {stream::eval, 0xd}));
  std::vector<IdmParams> drivers;
  for (int i = 0; i < ctx.cfg.eval.drivers; ++i)
    drivers.push_back(sample_driver(pop, driver_rng));

  const std::vector<double> pv = pv_profile(ctx, 0);

  // HDV energy with and without the CAV in between
  const EvalReport scenarios = compare_scenarios(
      proposed, drivers, pop, ctx.cfg.env, pv, noise,
      derive_seed(ctx.cfg.seed, {stream::eval, 1}), ctx.cfg.workers);
  auto write_summary = [&](const EvalReport& report, const fs::path& path) {
    std::ofstream os(path);
    write_eval_summary(report, os);
    os << "\neffective config:\n";
    echo_config(ctx.cfg, os);
  };

  write_eval_report_csv(scenarios, (ctx.out / "scenarios.csv").string());
  write_summary(scenarios, ctx.out / "scenarios_summary.txt");
  std::cout << "scenario A vs B: mean HDV energy "
            << scenarios.summary.mean_hdv_a / 1000.0 << " kJ vs "
            << scenarios.summary.mean_hdv_b / 1000.0
            << " kJ (mean improvement "
            << scenarios.summary.mean_improvement << "%)\n";

  // proposed vs reference, pooled over the evaluation seeds
  std::vector<DriverRecord> pooled;
  for (int s = 0; s < ctx.cfg.eval.noise_seeds; ++s) {
    const EvalReport rep = compare_strategies(
        proposed, reference, drivers, pop, ctx.cfg.env, pv, noise,
        derive_seed(ctx.cfg.seed,
                    {stream::eval, 100 + static_cast<std::uint64_t>(s)}),
        ctx.cfg.workers);
    write_eval_report_csv(
        rep,
        (ctx.out / ("strategies_seed" + std::to_string(s) + ".csv")).string());
    pooled.insert(pooled.end(), rep.records.begin(), rep.records.end());
  }
  EvalReport pooled_report;
  pooled_report.condition_a = "proposed strategy";
  pooled_report.condition_b = "reference strategy";
  pooled_report.compared = "total";
  pooled_report.records = std::move(pooled);
  pooled_report.summary = summarize(pooled_report.records);
  write_summary(pooled_report, ctx.out / "strategies_summary.txt");
  std::cout << "proposed vs reference: mean improvement "
            << pooled_report.summary.mean_improvement << "% ("
            << pooled_report.summary.fraction_negative * 100.0
            << "% of drivers worsened)\n";

  // held-out PV profiles
  std::vector<std::vector<double>> heldout;
  for (int p = 0; p < ctx.cfg.eval.heldout_profiles; ++p)
    heldout.push_back(pv_profile(ctx, 200 + static_cast<std::uint64_t>(p)));
  const auto reports = generalization_suite(
      proposed, reference, drivers, pop, ctx.cfg.env, heldout, noise,
      derive_seed(ctx.cfg.seed, {stream::eval, 300}), ctx.cfg.workers);
  std::ofstream gos(ctx.out / "generalization_summary.txt");
  for (std::size_t p = 0; p < reports.size(); ++p) {
    write_eval_report_csv(
        reports[p],
        (ctx.out / ("generalization_profile" + std::to_string(p) + ".csv"))
            .string());
    gos << "held-out profile " << p << ":\n";
    write_eval_summary(reports[p], gos);
    gos << "\n";
    std::cout << "held-out profile " << p << ": mean improvement "
              << reports[p].summary.mean_improvement << "%\n";
  }
  gos << "effective config:\n";
  echo_config(ctx.cfg, gos);
  return 0;
}

int run_simulate(const CommonFlags& flags) {
  Context ctx = make_context(flags);
  const bool noise = !flags.no_noise;
  const Policy policy = load_policy(ctx, ctx.mode);
  const DriverPopulation pop = load_population(ctx);

  IdmParams driver;
  if (ctx.cfg.sim.driver_v0 > 0.0 && ctx.cfg.sim.driver_T > 0.0) {
    driver = make_idm_params(ctx.cfg.sim.driver_v0, ctx.cfg.sim.driver_T,
                             ctx.cfg.idm);
  } else {
    auto rng = make_rng(derive_seed(ctx.cfg.seed, {stream::driver, 0x51}));
    driver = sample_driver(pop, rng);
  }

  EnvConfig env_cfg = ctx.cfg.env;
  env_cfg.reward_mode = policy.mode;
  if (!noise) env_cfg.hdv_noise_max = 0.0;

  const std::vector<double> pv = pv_profile(ctx, 0);
  const EpisodeRollout roll =
      roll_episode(env_cfg, pop, driver, pv, network_controller(policy),
                   derive_seed(ctx.cfg.seed, {stream::eval, 0x77}));
  write_trace_csv(roll, env_cfg.dt, (ctx.out / "trace.csv").string());

  std::cout << "driver: v0 " << driver.desired_speed << " m/s, T "
            << driver.time_gap << " s\n";
  std::cout << "steps: " << roll.steps << (roll.collided ? " (collision)" : "")
            << "\n";
  std::cout << "total reward: " << roll.total_reward << "\n";
  std::cout << "CAV energy: " << roll.cav_energy / 1000.0
            << " kJ, HDV energy: " << roll.hdv_energy / 1000.0 << " kJ\n";
  std::cout << "trace: " << (ctx.out / "trace.csv") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive leading cruise control toolkit"};
  app.require_subcommand(1);

  CommonFlags gen_flags, cal_flags, train_flags, eval_flags, sim_flags;

  CLI::App* gen = app.add_subcommand(
      "gen-data", "generate a synthetic episode corpus and driver population");
  add_common(gen, gen_flags, false, true, false, true);

  CLI::App* cal = app.add_subcommand(
      "calibrate", "fit IDM preferences to the corpus with the GA");
  add_common(cal, cal_flags, false, false, false, true);

  CLI::App* tr = app.add_subcommand("train", "train the DDPG agent");
  add_common(tr, train_flags, true, true, true, true);

  CLI::App* ev = app.add_subcommand(
      "evaluate", "run the scenario, strategy and generalization studies");
  add_common(ev, eval_flags, false, false, true, true);

  CLI::App* sim = app.add_subcommand(
      "simulate", "roll one episode with a chosen driver and write the trace");
  add_common(sim, sim_flags, true, false, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_flags);
    if (cal->parsed()) return run_calibrate(cal_flags);
    if (tr->parsed()) return run_train(train_flags);
    if (ev->parsed()) return run_evaluate(eval_flags);
    if (sim->parsed()) return run_simulate(sim_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
