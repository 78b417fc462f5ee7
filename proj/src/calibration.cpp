#include "alcc/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "alcc/parallel.hpp"
#include "alcc/rng.hpp"

namespace alcc {

namespace {

// Search bounds per genome slot. Local mode optimizes (v0, T); global mode
// optimizes (a, v0, s0, T, b) with the acceleration exponent kept fixed.
struct Bounds {
  double lo, hi;
};

constexpr Bounds kV0Bounds{idm_bounds::v0_min, idm_bounds::v0_max};
constexpr Bounds kTBounds{idm_bounds::T_min, idm_bounds::T_max};
constexpr Bounds kABounds{0.1, 4.0};
constexpr Bounds kS0Bounds{0.1, 10.0};
constexpr Bounds kBBounds{0.1, 5.0};

std::vector<Bounds> genome_bounds(GaMode mode) {
  if (mode == GaMode::local) return {kV0Bounds, kTBounds};
  return {kABounds, kV0Bounds, kS0Bounds, kTBounds, kBBounds};
}

IdmParams params_from_genome(GaMode mode, const std::vector<double>& genome,
                             const IdmFixedConstants& fixed) {
  IdmParams p;
  if (mode == GaMode::local) {
    p = make_idm_params(genome[0], genome[1], fixed);
  } else {
    p.max_accel = genome[0];
    p.desired_speed = genome[1];
    p.min_gap = genome[2];
    p.time_gap = genome[3];
    p.comfort_decel = genome[4];
    p.accel_exponent = fixed.accel_exponent;
    p.validate();
  }
  return p;
}

double clamp(double x, const Bounds& b) { return std::clamp(x, b.lo, b.hi); }

}  // namespace

void CarFollowingEpisode::validate() const {
  if (dt <= 0.0) throw std::invalid_argument("episode dt must be > 0");
  if (leader_speed.size() != follower_speed.size())
    throw std::invalid_argument("episode speed series lengths differ");
  if (leader_speed.size() < 50)
    throw std::invalid_argument("episode needs at least 50 samples");
  if (initial_gap <= 0.0)
    throw std::invalid_argument("episode initial gap must be > 0");
  for (double v : leader_speed)
    if (v < 0.0) throw std::invalid_argument("negative leader speed");
  for (double v : follower_speed)
    if (v < 0.0) throw std::invalid_argument("negative follower speed");
}

FollowerSim simulate_idm_follower(const IdmParams& p,
                                  const CarFollowingEpisode& episode) {
  const std::size_t n = episode.leader_speed.size();
  FollowerSim out;
  out.speed.assign(n, 0.0);
  out.speed[0] = episode.follower_speed[0];
  double gap = episode.initial_gap;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (gap <= 0.0) {
      out.collided = true;
      out.collision_step = k;
      // hold the last speed; the fitness function discards the run anyway
      for (std::size_t j = k + 1; j < n; ++j) out.speed[j] = out.speed[k];
      return out;
    }
    const double v = out.speed[k];
    const double accel =
        idm_acceleration(p, v, v - episode.leader_speed[k], gap);
    const double v_next = std::max(0.0, v + accel * episode.dt);
    const double dv_now = episode.leader_speed[k] - v;
    const double dv_next = episode.leader_speed[k + 1] - v_next;
    gap += 0.5 * (dv_now + dv_next) * episode.dt;
    out.speed[k + 1] = v_next;
  }
  if (gap <= 0.0) {
    out.collided = true;
    out.collision_step = n - 1;
  }
  return out;
}

double rmspe(std::span<const double> simulated,
             std::span<const double> observed) {
  if (simulated.size() != observed.size())
    throw std::invalid_argument("rmspe series lengths differ");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double d = simulated[k] - observed[k];
    num += d * d;
    den += observed[k] * observed[k];
  }
  if (den == 0.0)
    throw std::invalid_argument("rmspe undefined for an all-zero observation");
  return std::sqrt(num / den);
}

void GaConfig::validate() const {
  if (population_size < 4)
    throw std::invalid_argument("GA population must be >= 4");
  if (generations < 0) throw std::invalid_argument("GA generations must be >= 0");
  if (crossover_rate < 0.0 || crossover_rate > 1.0 || mutation_rate < 0.0 ||
      mutation_rate > 1.0)
    throw std::invalid_argument("GA rates must lie in [0, 1]");
  if (mutation_sigma < 0.0)
    throw std::invalid_argument("GA mutation sigma must be >= 0");
}

int GaConfig::effective_generations() const {
  const int nvars = mode == GaMode::local ? 2 : 5;
  return generations * nvars / 2;
}

namespace {

double episode_fitness(const CarFollowingEpisode& episode, const IdmParams& p) {
  const FollowerSim sim = simulate_idm_follower(p, episode);
  if (sim.collided) return kCollisionFitness;
  return rmspe(sim.speed, episode.follower_speed);
}

}  // namespace

EpisodeFit calibrate_episode(const CarFollowingEpisode& episode,
                             const GaConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  episode.validate();
  const auto bounds = genome_bounds(cfg.mode);
  const std::size_t nvars = bounds.size();
  auto rng = make_rng(seed);

  struct Individual {
    std::vector<double> genome;
    double fitness = 0.0;
  };

  EpisodeFit result;
  result.episode_id = episode.id;

  auto evaluate = [&](const std::vector<double>& genome) {
    ++result.evaluations;
    return episode_fitness(episode,
                           params_from_genome(cfg.mode, genome, cfg.fixed));
  };

  std::vector<Individual> pop(cfg.population_size);
  for (auto& ind : pop) {
    ind.genome.resize(nvars);
    for (std::size_t g = 0; g < nvars; ++g)
      ind.genome[g] = uniform(rng, bounds[g].lo, bounds[g].hi);
    ind.fitness = evaluate(ind.genome);
  }

  auto best_of = [](const std::vector<Individual>& v) {
    std::size_t bi = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i].fitness < v[bi].fitness) bi = i;
    return bi;
  };

  auto tournament = [&](const std::vector<Individual>& v) -> const Individual& {
    std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    return v[a].fitness <= v[b].fitness ? v[a] : v[b];
  };

  Individual best = pop[best_of(pop)];
  result.best_per_generation.push_back(best.fitness);

  const int gens = cfg.effective_generations();
  for (int gen = 0; gen < gens; ++gen) {
    std::vector<Individual> next;
    next.reserve(pop.size());
    next.push_back(best);  // elitism of 1
    while (next.size() < pop.size()) {
      const Individual& p1 = tournament(pop);
      const Individual& p2 = tournament(pop);
      Individual child;
      child.genome.resize(nvars);
      const bool crossed = uniform(rng, 0.0, 1.0) < cfg.crossover_rate;
      for (std::size_t g = 0; g < nvars; ++g) {
        if (crossed) {
          const double u = uniform(rng, 0.0, 1.0);
          child.genome[g] = u * p1.genome[g] + (1.0 - u) * p2.genome[g];
        } else {
          child.genome[g] = p1.genome[g];
        }
        if (uniform(rng, 0.0, 1.0) < cfg.mutation_rate) {
          const double range = bounds[g].hi - bounds[g].lo;
          child.genome[g] += normal(rng, 0.0, cfg.mutation_sigma * range);
        }
        child.genome[g] = clamp(child.genome[g], bounds[g]);
      }
      child.fitness = evaluate(child.genome);
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    const Individual& gen_best = pop[best_of(pop)];
    if (gen_best.fitness < best.fitness) best = gen_best;
    result.best_per_generation.push_back(best.fitness);
  }

  result.params = params_from_genome(cfg.mode, best.genome, cfg.fixed);
  result.fitness = best.fitness;
  return result;
}

std::vector<EpisodeFit> ga_calibrate(
    const std::vector<CarFollowingEpisode>& episodes, const GaConfig& cfg,
    int workers) {
  cfg.validate();
  if (episodes.empty())
    throw std::invalid_argument("calibration needs at least one episode");
  std::vector<EpisodeFit> fits(episodes.size());
  parallel_for(episodes.size(), workers, [&](std::size_t i) {
    fits[i] = calibrate_episode(episodes[i], cfg,
                                derive_seed(cfg.seed, {stream::ga, i}));
  });
  return fits;
}

void DriverPopulation::validate() const {
  if (entries.empty()) throw std::invalid_argument("empty driver population");
  for (const auto& [v0, T] : entries) {
    if (v0 < idm_bounds::v0_min || v0 > idm_bounds::v0_max ||
        T < idm_bounds::T_min || T > idm_bounds::T_max)
      throw std::invalid_argument("population entry outside IDM bounds");
  }
}

double DriverPopulation::mean_v0() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.first;
  return s / static_cast<double>(entries.size());
}

double DriverPopulation::mean_T() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.second;
  return s / static_cast<double>(entries.size());
}

double DriverPopulation::std_v0() const {
  const double m = mean_v0();
  double s = 0.0;
  for (const auto& e : entries) s += (e.first - m) * (e.first - m);
  return std::sqrt(s / static_cast<double>(entries.size()));
}

double DriverPopulation::std_T() const {
  const double m = mean_T();
  double s = 0.0;
  for (const auto& e : entries) s += (e.second - m) * (e.second - m);
  return std::sqrt(s / static_cast<double>(entries.size()));
}

double DriverPopulation::pearson() const {
  const double mv = mean_v0();
  const double mt = mean_T();
  double cov = 0.0;
  for (const auto& e : entries) cov += (e.first - mv) * (e.second - mt);
  cov /= static_cast<double>(entries.size());
  const double sv = std_v0();
  const double st = std_T();
  if (sv == 0.0 || st == 0.0) return 0.0;
  return cov / (sv * st);
}

IdmParams DriverPopulation::mean_driver() const {
  validate();
  return make_idm_params(mean_v0(), mean_T(), fixed);
}

IdmParams sample_driver(const DriverPopulation& pop, std::mt19937_64& rng) {
  pop.validate();
  std::uniform_int_distribution<std::size_t> pick(0, pop.entries.size() - 1);
  auto [v0, T] = pop.entries[pick(rng)];
  if (pop.jitter_scale > 0.0) {
    v0 += pop.jitter_scale * pop.std_v0() * normal(rng);
    T += pop.jitter_scale * pop.std_T() * normal(rng);
  }
  v0 = std::clamp(v0, idm_bounds::v0_min, idm_bounds::v0_max);
  T = std::clamp(T, idm_bounds::T_min, idm_bounds::T_max);
  return make_idm_params(v0, T, pop.fixed);
}

DriverPopulation make_fixture_population(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("population size must be > 0");
  DriverPopulation pop;
  pop.jitter_scale = 0.05;
  pop.entries.reserve(n);
  auto rng = make_rng(derive_seed(seed, {stream::population}));
  constexpr double rho = 0.24;
  constexpr double v0_mean = 22.0, v0_sd = 5.0;
  constexpr double T_mean = 1.5, T_sd = 0.4;
  const double rest = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double v0 = std::clamp(v0_mean + v0_sd * z1, 5.0, idm_bounds::v0_max);
    const double T =
        std::clamp(T_mean + T_sd * (rho * z1 + rest * z2), 0.4, 3.5);
    pop.entries.emplace_back(v0, T);
  }
  return pop;
}

namespace {

// Minimal Nelder-Mead on two variables with projection into the bounds.
std::array<double, 2> nelder_mead_2d(
    const std::function<double(double, double)>& f, std::array<double, 2> start,
    const std::array<Bounds, 2>& bounds) {
  struct Vertex {
    std::array<double, 2> x;
    double v;
  };
  auto project = [&](std::array<double, 2> x) {
    x[0] = clamp(x[0], bounds[0]);
    x[1] = clamp(x[1], bounds[1]);
    return x;
  };
  auto eval = [&](std::array<double, 2> x) {
    x = project(x);
    return Vertex{x, f(x[0], x[1])};
  };

  std::array<Vertex, 3> s;
  s[0] = eval(start);
  s[1] = eval({start[0] + 0.05 * (bounds[0].hi - bounds[0].lo), start[1]});
  s[2] = eval({start[0], start[1] + 0.05 * (bounds[1].hi - bounds[1].lo)});

  constexpr int kMaxIter = 300;
  for (int it = 0; it < kMaxIter; ++it) {
    std::sort(s.begin(), s.end(),
              [](const Vertex& a, const Vertex& b) { return a.v < b.v; });
    const double spread = std::abs(s[2].v - s[0].v);
    const double size = std::max(std::abs(s[2].x[0] - s[0].x[0]),
                                 std::abs(s[2].x[1] - s[0].x[1]));
    if (spread < 1e-14 && size < 1e-12) break;

    const std::array<double, 2> centroid{(s[0].x[0] + s[1].x[0]) / 2.0,
                                         (s[0].x[1] + s[1].x[1]) / 2.0};
    auto along = [&](double t) {
      return eval({centroid[0] + t * (centroid[0] - s[2].x[0]),
                   centroid[1] + t * (centroid[1] - s[2].x[1])});
    };
    Vertex reflected = along(1.0);
    if (reflected.v < s[0].v) {
      Vertex expanded = along(2.0);
      s[2] = expanded.v < reflected.v ? expanded : reflected;
    } else if (reflected.v < s[1].v) {
      s[2] = reflected;
    } else {
      Vertex contracted =
          reflected.v < s[2].v ? along(0.5) : along(-0.5);
      if (contracted.v < std::min(reflected.v, s[2].v)) {
        s[2] = contracted;
      } else {
        // shrink toward the best vertex
        for (int i = 1; i < 3; ++i)
          s[i] = eval({s[0].x[0] + 0.5 * (s[i].x[0] - s[0].x[0]),
                       s[0].x[1] + 0.5 * (s[i].x[1] - s[0].x[1])});
      }
    }
  }
  std::sort(s.begin(), s.end(),
            [](const Vertex& a, const Vertex& b) { return a.v < b.v; });
  return s[0].x;
}

}  // namespace

OnlineFit fit_online(std::span<const double> observed_speeds,
                     std::span<const double> leader_speeds,
                     std::span<const double> gaps,
                     const DriverPopulation& prior) {
  if (observed_speeds.size() < 50)
    throw std::invalid_argument("online fit needs at least 50 samples");
  if (observed_speeds.size() != leader_speeds.size() ||
      observed_speeds.size() != gaps.size())
    throw std::invalid_argument("online fit series lengths differ");
  prior.validate();

  CarFollowingEpisode window;
  window.leader_speed.assign(leader_speeds.begin(), leader_speeds.end());
  window.follower_speed.assign(observed_speeds.begin(), observed_speeds.end());
  window.initial_gap = gaps.front();
  window.id = "online-window";

  auto objective = [&](double v0, double T) {
    return episode_fitness(window, make_idm_params(v0, T, prior.fixed));
  };

  const std::array<Bounds, 2> bounds{kV0Bounds, kTBounds};
  constexpr int kGrid = 12;
  double best_v0 = prior.mean_v0();
  double best_T = prior.mean_T();
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double v0 = bounds[0].lo + (bounds[0].hi - bounds[0].lo) *
                                         (i + 0.5) / kGrid;
    for (int j = 0; j < kGrid; ++j) {
      const double T =
          bounds[1].lo + (bounds[1].hi - bounds[1].lo) * (j + 0.5) / kGrid;
      const double val = objective(v0, T);
      if (val < best_val) {
        best_val = val;
        best_v0 = v0;
        best_T = T;
      }
    }
  }

  const auto refined_grid = nelder_mead_2d(objective, {best_v0, best_T}, bounds);
  const auto refined_prior = nelder_mead_2d(
      objective, {prior.mean_v0(), prior.mean_T()}, bounds);
  const double val_grid = objective(refined_grid[0], refined_grid[1]);
  const double val_prior = objective(refined_prior[0], refined_prior[1]);
  const auto& pick = val_grid <= val_prior ? refined_grid : refined_prior;
  return OnlineFit{pick[0], pick[1]};
}

}  // namespace alcc
