// End-to-end acceptance suite. Each criterion prints one pass/fail line;
// the binary exits non-zero if any criterion fails. argv[1] must point at
// the CLI binary (used by the reproducibility criterion).

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "alcc/data_io.hpp"
#include "alcc/ddpg.hpp"
#include "alcc/evaluation.hpp"
#include "alcc/network.hpp"
#include "alcc/rng.hpp"

namespace fs = std::filesystem;
using namespace alcc;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void verdict(int criterion, bool pass, const std::string& what,
             const std::string& detail) {
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion
            << ": " << what;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

bool rel_ok(double actual, double expected, double tol = 1e-9) {
  return std::abs(actual - expected) <=
         tol * std::max({1.0e-30, std::abs(actual), std::abs(expected)});
}

// ---------------------------------------------------------------- c1, c2

void criterion_formulas() {
  const auto start = Clock::now();
  bool ok = true;
  std::string bad;
  auto expect = [&](bool cond, const char* name) {
    if (!cond && ok) {
      ok = false;
      bad = name;
    }
  };

  const VehicleParams vp = default_vehicle_params();
  expect(rel_ok(traction_force(vp, 0, 0), 1005.0 * 9.81 * 0.015),
         "traction at rest");
  expect(rel_ok(traction_force(vp, 0, 1), 1005.0 * 9.81 * 0.015 + 1.02 * 1005.0),
         "traction accelerating");

  const EnergyCoefficients ec = default_energy_coefficients();
  expect(rel_ok(motor_power(ec, 10, 0),
                110.3 + 4229.0 - 2.79 + 355.7),
         "motor power at 10 m/s");
  std::vector<double> v(300, 10.0), a(300, 0.0);
  expect(rel_ok(trip_energy(ec, v, a, 0.1), (110.3 + 4229.0 - 2.79 + 355.7) * 30.0),
         "trip energy");

  const IdmParams idm = make_idm_params(30.0, 1.5);
  expect(rel_ok(idm_acceleration(idm, 0, 0, 1e9), 1.0 - 4e-18),
         "IDM free road");
  const double s_star = 2.0 + 45.0;
  expect(rel_ok(idm_acceleration(idm, 30, 0, 1e9), -(s_star / 1e9) * (s_star / 1e9),
                1e-6),
         "IDM at v0");
  expect(rel_ok(idm_equilibrium_gap(idm, 15.0), 24.5 / std::sqrt(0.9375)),
         "IDM equilibrium gap");

  std::vector<double> obs{3, 4, 5}, sim{3.3, 4.4, 5.5};
  expect(rel_ok(rmspe(sim, obs), 0.1), "rmspe scale");

  expect(rel_ok(ttc(20.0, -5.0), 4.0), "ttc closing");
  const EnvConfig env;
  expect(rel_ok(reward_safety(0.4, env), std::log(0.1)), "safety reward");
  expect(reward_efficiency(25.0, 10.0, env) == -1.0, "efficiency reward");
  expect(rel_ok(reward_cav(20000.0, env), -0.1), "CAV reward");
  expect(rel_ok(reward_hdv(0.0, 0.0, env), -110.3 / 20000.0 * 0.1),
         "HDV reward");

  const double elapsed = seconds_since(start);
  verdict(1, ok && elapsed < 1.0, "formula fidelity at 1e-9",
          ok ? "runtime " + fmt(elapsed) + " s" : "mismatch: " + bad);

  verdict(2, motor_power(ec, 0.0, 0.0) == 110.3,
          "energy-model anchor p00 is exact",
          "motor_power(0,0) = " + fmt(motor_power(ec, 0.0, 0.0)) + " W");
}

// -------------------------------------------------------------------- c3

void criterion_gradients() {
  const auto start = Clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    NetworkSpec spec;
    spec.widths = {7, 200, 100, 50, 1};
    spec.output = OutputActivation::tanh;
    spec.init_seed = 9000 + trial;
    Network net = make_network(spec);

    auto rng = make_rng(9100 + trial);
    std::vector<double> x(7);
    for (double& xi : x) xi = uniform(rng, -1.0, 1.0);
    const std::vector<double> upstream{1.0};

    ForwardCache cache;
    forward(net, x, cache);
    ParamSet grads = zero_gradients(net);
    backward(net, cache, upstream, grads);

    auto objective = [&]() { return forward(net, x)[0]; };
    const double h = 1e-5;
    auto probe = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = objective();
      param = saved - h;
      const double down = objective();
      param = saved;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - analytic) /
                                  std::max({1e-6, std::abs(fd),
                                            std::abs(analytic)}));
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (std::size_t i = 0; i < net.layers[l].w.size(); ++i)
        probe(net.layers[l].w[i], grads[l].w[i]);
      for (std::size_t i = 0; i < net.layers[l].b.size(); ++i)
        probe(net.layers[l].b[i], grads[l].b[i]);
    }
  }
  const double elapsed = seconds_since(start);
  verdict(3, worst < 1e-4 && elapsed < 30.0,
          "backward matches finite differences on 10 networks",
          "worst rel err " + fmt(worst) + ", runtime " + fmt(elapsed) + " s");
}

// -------------------------------------------------------------------- c4

void criterion_calibration() {
  const auto start = Clock::now();
  std::vector<CarFollowingEpisode> corpus;
  std::vector<std::pair<double, double>> truths;
  auto rng = make_rng(41);
  for (int i = 0; i < 50; ++i) {
    const double v0 = uniform(rng, 15.0, 30.0);
    const double T = uniform(rng, 0.6, 2.5);
    SyntheticProfileSpec spec;
    spec.seed = derive_seed(42, {static_cast<std::uint64_t>(i)});
    corpus.push_back(make_synthetic_episode(v0, T, {}, spec,
                                            derive_seed(43, {static_cast<std::uint64_t>(i)}))
                         .episode);
    truths.emplace_back(v0, T);
  }

  GaConfig local;
  local.seed = 44;
  local.mode = GaMode::local;
  const auto t_local_start = Clock::now();
  const auto fits = ga_calibrate(corpus, local, 0);
  const double t_local = seconds_since(t_local_start);

  int recovered = 0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const bool v0_ok =
        std::abs(fits[i].params.desired_speed - truths[i].first) /
            truths[i].first <
        0.05;
    const bool T_ok = std::abs(fits[i].params.time_gap - truths[i].second) /
                          truths[i].second <
                      0.05;
    if (v0_ok && T_ok) ++recovered;
  }

  GaConfig global = local;
  global.mode = GaMode::global;
  const auto t_global_start = Clock::now();
  ga_calibrate(corpus, global, 0);
  const double t_global = seconds_since(t_global_start);

  const double elapsed = seconds_since(start);
  verdict(4,
          recovered >= 45 && t_local * 2.0 <= t_global && elapsed < 300.0,
          "GA recovers (v0, T) and the local mode is at least 2x faster",
          fmt(recovered) + "/50 within 5%, local " + fmt(t_local) +
              " s vs global " + fmt(t_global) + " s, total " + fmt(elapsed) +
              " s");
}

// -------------------------------------------------------------------- c5

void criterion_equilibrium() {
  DriverPopulation pop;
  pop.entries = {{25.0, 1.2}};
  EnvConfig cfg;
  cfg.hdv_noise_max = 0.0;
  Environment env(cfg, pop);
  const std::vector<double> pv(301, 10.0);
  const EnvState init = env.reset(pv, make_idm_params(25.0, 1.2), 51);
  EnvState s = init;
  for (int k = 0; k < 300; ++k) s = env.step(0.0).next_state;
  const double drift = std::max(std::abs(s.gap_cav_hdv - init.gap_cav_hdv),
                                std::abs(s.gap_pv_cav - init.gap_pv_cav));
  verdict(5, drift < 1e-9, "IDM equilibrium is a 300-step fixed point",
          "max gap drift " + fmt(drift) + " m");
}

// -------------------------------------------------------------------- c6

void criterion_safety() {
  const DriverPopulation pop = make_fixture_population(923, 61);
  auto rng = make_rng(62);
  EnvConfig cfg;  // noise active
  bool any_collision = false;
  for (int i = 0; i < 100; ++i) {
    SyntheticProfileSpec spec;
    spec.seed = derive_seed(63, {static_cast<std::uint64_t>(i)});
    const std::vector<double> pv = generate_synthetic_pv(spec);
    const IdmParams driver = sample_driver(pop, rng);
    if (roll_two_vehicle(cfg, driver, pv,
                         derive_seed(64, {static_cast<std::uint64_t>(i)}))
            .collided)
      any_collision = true;
  }
  verdict(6, !any_collision,
          "100 sampled followers never collide behind fixture profiles", "");
}

// --------------------------------------------------------- c7 .. c11

struct DeskSetup {
  DriverPopulation pop = make_fixture_population(923, 71);
  EnvConfig env;
  std::vector<double> pv_main;
  std::vector<std::vector<double>> pv_heldout;

  DeskSetup() {
    SyntheticProfileSpec spec;
    spec.seed = derive_seed(72, {0});
    pv_main = generate_synthetic_pv(spec);
    for (int p = 0; p < 2; ++p) {
      SyntheticProfileSpec held = spec;
      held.seed = derive_seed(72, {static_cast<std::uint64_t>(100 + p)});
      pv_heldout.push_back(generate_synthetic_pv(held));
    }
  }

  DdpgConfig desk_config(std::uint64_t seed) const {
    DdpgConfig cfg;
    cfg.episodes = 500;
    cfg.batch_size = 96;
    cfg.update_every = 3;
    cfg.seed = seed;
    cfg.workers = 0;
    return cfg;
  }

  TrainResult train_agent(RewardMode mode, std::uint64_t seed) const {
    EnvConfig env_cfg = env;
    env_cfg.reward_mode = mode;
    const PvSource source = [this](int) -> const std::vector<double>& {
      return pv_main;
    };
    return train(env_cfg, pop, source, desk_config(seed));
  }
};

double mean_of(const std::vector<EpisodeLog>& log, std::size_t from,
               std::size_t count) {
  double sum = 0.0;
  for (std::size_t i = from; i < from + count; ++i) sum += log[i].reward;
  return sum / static_cast<double>(count);
}

int main_criteria_7_to_11(const DeskSetup& setup) {
  // --- c7: convergence over three seeds
  std::vector<TrainResult> runs;
  bool improved_everywhere = true;
  std::string detail;
  const auto start = Clock::now();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto seed_start = Clock::now();
    TrainResult result = setup.train_agent(RewardMode::proposed, seed);
    const double t = seconds_since(seed_start);
    const double first = mean_of(result.log, 0, 100);
    const double last = mean_of(result.log, result.log.size() - 100, 100);
    if (!(last > first)) improved_everywhere = false;
    detail += "seed " + std::to_string(seed) + ": " + fmt(first) + " -> " +
              fmt(last) + " in " + fmt(t) + " s; ";
    if (!(t < 1800.0)) improved_everywhere = false;
    runs.push_back(std::move(result));
  }
  verdict(7, improved_everywhere,
          "desk training improves the trailing-100 episode reward on 3 seeds",
          detail + "total " + fmt(seconds_since(start)) + " s");

  const Policy proposed = to_policy(runs.front().agent);
  const TrainResult reference_run = setup.train_agent(RewardMode::reference, 1);
  const Policy reference = to_policy(reference_run.agent);

  auto driver_rng = make_rng(73);
  std::vector<IdmParams> drivers;
  for (int i = 0; i < 100; ++i)
    drivers.push_back(sample_driver(setup.pop, driver_rng));

  // --- c8: scenario A vs B
  const EvalReport scen = compare_scenarios(proposed, drivers, setup.pop,
                                            setup.env, setup.pv_main, true,
                                            81, 0);
  verdict(8,
          scen.summary.mean_hdv_a < scen.summary.mean_hdv_b &&
              scen.summary.collisions == 0,
          "leading the HDV lowers its mean trip energy vs direct following",
          "A " + fmt(scen.summary.mean_hdv_a / 1000.0) + " kJ vs B " +
              fmt(scen.summary.mean_hdv_b / 1000.0) + " kJ; improvement mean " +
              fmt(scen.summary.mean_improvement) + "%, min " +
              fmt(scen.summary.min_improvement) + "%, max " +
              fmt(scen.summary.max_improvement) + "%");

  // --- c9: proposed vs reference over three evaluation seeds
  std::vector<DriverRecord> pooled;
  std::string per_seed;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const EvalReport rep =
        compare_strategies(proposed, reference, drivers, setup.pop, setup.env,
                           setup.pv_main, true, 90 + s, 0);
    per_seed += "seed " + std::to_string(s) + ": " +
                fmt(rep.summary.mean_improvement) + "%; ";
    pooled.insert(pooled.end(), rep.records.begin(), rep.records.end());
  }
  const EvalSummary pooled_summary = summarize(pooled);
  verdict(9,
          pooled_summary.mean_total_a < pooled_summary.mean_total_b &&
              pooled_summary.fraction_negative < 0.5,
          "the proposed strategy lowers mean total energy vs the reference",
          per_seed + "pooled " + fmt(pooled_summary.mean_improvement) +
              "%, negative fraction " +
              fmt(pooled_summary.fraction_negative * 100.0) + "%");

  // --- c10: reference CAV energy is driver-independent without noise
  const auto energies = evaluate_policy(reference, drivers, setup.pop,
                                        setup.env, setup.pv_main, false, 101, 0);
  bool constant = true;
  for (const auto& e : energies)
    if (e.cav != energies.front().cav) constant = false;
  verdict(10, constant,
          "reference-mode CAV trip energy is bitwise identical across drivers",
          fmt(energies.front().cav / 1000.0) + " kJ for all " +
              std::to_string(energies.size()) + " drivers");

  // --- c11: held-out profiles
  const auto reports =
      generalization_suite(proposed, reference, drivers, setup.pop, setup.env,
                           setup.pv_heldout, true, 111, 0);
  int positive = 0;
  std::string gen_detail;
  for (std::size_t p = 0; p < reports.size(); ++p) {
    if (reports[p].summary.mean_total_a < reports[p].summary.mean_total_b)
      ++positive;
    gen_detail += "profile " + std::to_string(p) + ": " +
                  fmt(reports[p].summary.mean_improvement) + "%; ";
  }
  verdict(11, positive >= 1,
          "the improvement carries to at least one held-out profile",
          gen_detail);
  return 0;
}

// ------------------------------------------------------------------- c12

bool directories_identical(const fs::path& a, const fs::path& b,
                           std::string& why) {
  std::vector<fs::path> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) {
    why = "file sets differ";
    return false;
  }
  for (const auto& rel : rel_a) {
    std::ifstream fa(a / rel, std::ios::binary);
    std::ifstream fb(b / rel, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (sa.str() != sb.str()) {
      why = "content differs: " + rel.string();
      return false;
    }
  }
  return true;
}

int exit_code(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_cli_reproducibility(const std::string& cli) {
  const fs::path root =
      fs::temp_directory_path() / ("alcc-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string devnull = " > /dev/null 2>&1";

  // exit-code contract: 1 on usage errors, 2 on runtime errors
  const bool usage_code =
      exit_code("\"" + cli + "\" train --bogus-flag" + devnull) == 1;
  const bool runtime_code =
      exit_code("\"" + cli + "\" evaluate --out \"" + (root / "empty").string() +
                "\"" + devnull) == 2;

  const fs::path cfg_path = root / "run.cfg";
  {
    std::ofstream cfg(cfg_path);
    cfg << "seed = 5\n";
    cfg << "gen.episodes = 6\n";
    cfg << "gen.population_size = 60\n";
    cfg << "ga.population_size = 12\n";
    cfg << "ga.generations = 8\n";
    cfg << "ddpg.episodes = 3\n";
    cfg << "ddpg.batch_size = 32\n";
    cfg << "ddpg.hidden = 16,8\n";
    cfg << "eval.drivers = 5\n";
    cfg << "eval.noise_seeds = 2\n";
  }

  auto pipeline = [&](const fs::path& out) {
    const std::string base = "\"" + cli + "\"";
    const std::string tail = " --config \"" + cfg_path.string() +
                             "\" --out \"" + out.string() + "\" >> \"" +
                             (root / "cli.log").string() + "\" 2>&1";
    const std::vector<std::string> commands = {
        base + " gen-data" + tail,
        base + " calibrate" + tail,
        base + " train --mode proposed" + tail,
        base + " train --mode reference" + tail,
        base + " evaluate" + tail,
        base + " simulate" + tail,
    };
    for (const auto& cmd : commands) {
      if (std::system(cmd.c_str()) != 0) return false;
    }
    return true;
  };

  const bool ran = pipeline(root / "run1") && pipeline(root / "run2");
  std::string why;
  const bool identical =
      ran && directories_identical(root / "run1", root / "run2", why);
  std::string detail;
  if (!usage_code) detail += "usage exit code wrong; ";
  if (!runtime_code) detail += "runtime exit code wrong; ";
  detail += ran ? (identical ? "all artifacts match" : why)
                : "a CLI command failed, see " + (root / "cli.log").string();
  verdict(12, usage_code && runtime_code && ran && identical,
          "the five-command pipeline is byte-identical when re-run", detail);
  if (usage_code && runtime_code && ran && identical) fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-cli>\n";
    return 2;
  }
  std::cout << "acceptance suite\n================\n";
  criterion_formulas();
  criterion_gradients();
  criterion_calibration();
  criterion_equilibrium();
  criterion_safety();

  DeskSetup setup;
  main_criteria_7_to_11(setup);

  criterion_cli_reproducibility(argv[1]);

  std::cout << "================\n"
            << (g_failures == 0 ? "all criteria passed"
                                : std::to_string(g_failures) +
                                      " criterion(s) failed")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
