#include "alcc/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "alcc/rng.hpp"

namespace fs = std::filesystem;

namespace alcc {

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

std::string format_hex(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", value);
  return buf;
}

double parse_double(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("not an integer: '" + s + "'");
  }
  if (pos != s.size())
    throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

std::uint64_t parse_uint64(const std::string& s) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("not an unsigned integer: '" + s + "'");
  }
  if (pos != s.size())
    throw std::invalid_argument("not an unsigned integer: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

struct ConfigField {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::vector<ConfigField> build_config_fields() {
  std::vector<ConfigField> f;
  auto sub_dbl = [&](const std::string& key, auto outer, auto inner) {
    f.push_back({key,
                 [outer, inner](const RunConfig& c) {
                   return format_double((c.*outer).*inner);
                 },
                 [outer, inner](RunConfig& c, const std::string& v) {
                   (c.*outer).*inner = parse_double(v);
                 }});
  };
  auto sub_int = [&](const std::string& key, auto outer, auto inner) {
    f.push_back({key,
                 [outer, inner](const RunConfig& c) {
                   return std::to_string((c.*outer).*inner);
                 },
                 [outer, inner](RunConfig& c, const std::string& v) {
                   (c.*outer).*inner =
                       static_cast<std::remove_reference_t<decltype((c.*outer).*inner)>>(
                           parse_int(v));
                 }});
  };
  auto sub_str = [&](const std::string& key, auto outer, auto inner) {
    f.push_back({key,
                 [outer, inner](const RunConfig& c) { return (c.*outer).*inner; },
                 [outer, inner](RunConfig& c, const std::string& v) {
                   (c.*outer).*inner = v;
                 }});
  };

  f.push_back({"seed",
               [](const RunConfig& c) { return std::to_string(c.seed); },
               [](RunConfig& c, const std::string& v) { c.seed = parse_uint64(v); }});
  f.push_back({"workers",
               [](const RunConfig& c) { return std::to_string(c.workers); },
               [](RunConfig& c, const std::string& v) {
                 c.workers = static_cast<int>(parse_int(v));
               }});

  sub_dbl("vehicle.mass", &RunConfig::vehicle, &VehicleParams::mass);
  sub_dbl("vehicle.drag_coefficient", &RunConfig::vehicle,
          &VehicleParams::drag_coefficient);
  sub_dbl("vehicle.frontal_area", &RunConfig::vehicle,
          &VehicleParams::frontal_area);
  sub_dbl("vehicle.rolling_resistance", &RunConfig::vehicle,
          &VehicleParams::rolling_resistance);
  sub_dbl("vehicle.air_density", &RunConfig::vehicle, &VehicleParams::air_density);
  sub_dbl("vehicle.gravity", &RunConfig::vehicle, &VehicleParams::gravity);
  sub_dbl("vehicle.rotational_inertia", &RunConfig::vehicle,
          &VehicleParams::rotational_inertia_coeff);

  for (int i = 0; i <= 3; ++i) {
    for (int j = 0; j <= 2; ++j) {
      const std::string key =
          "energy.p" + std::to_string(i) + std::to_string(j);
      f.push_back({key,
                   [i, j](const RunConfig& c) {
                     return format_double(c.energy.p[i][j]);
                   },
                   [i, j](RunConfig& c, const std::string& v) {
                     c.energy.p[i][j] = parse_double(v);
                   }});
    }
  }
  f.push_back({"energy.clamp_negative",
               [](const RunConfig& c) {
                 return c.energy.clamp_negative ? "true" : "false";
               },
               [](RunConfig& c, const std::string& v) {
                 c.energy.clamp_negative = parse_bool(v);
               }});

  sub_dbl("idm.max_accel", &RunConfig::idm, &IdmFixedConstants::max_accel);
  sub_dbl("idm.comfort_decel", &RunConfig::idm,
          &IdmFixedConstants::comfort_decel);
  sub_dbl("idm.min_gap", &RunConfig::idm, &IdmFixedConstants::min_gap);
  sub_dbl("idm.accel_exponent", &RunConfig::idm,
          &IdmFixedConstants::accel_exponent);

  sub_int("ga.population_size", &RunConfig::ga, &GaConfig::population_size);
  sub_int("ga.generations", &RunConfig::ga, &GaConfig::generations);
  sub_dbl("ga.crossover_rate", &RunConfig::ga, &GaConfig::crossover_rate);
  sub_dbl("ga.mutation_rate", &RunConfig::ga, &GaConfig::mutation_rate);
  sub_dbl("ga.mutation_sigma", &RunConfig::ga, &GaConfig::mutation_sigma);
  f.push_back({"ga.mode",
               [](const RunConfig& c) {
                 return c.ga.mode == GaMode::local ? "local" : "global";
               },
               [](RunConfig& c, const std::string& v) {
                 if (v == "local") c.ga.mode = GaMode::local;
                 else if (v == "global") c.ga.mode = GaMode::global;
                 else throw std::invalid_argument("ga.mode must be local|global");
               }});
  f.push_back({"ga.compare_modes",
               [](const RunConfig& c) {
                 return c.ga_compare_modes ? "true" : "false";
               },
               [](RunConfig& c, const std::string& v) {
                 c.ga_compare_modes = parse_bool(v);
               }});

  sub_dbl("env.dt", &RunConfig::env, &EnvConfig::dt);
  sub_int("env.episode_steps", &RunConfig::env, &EnvConfig::episode_steps);
  sub_dbl("env.accel_min", &RunConfig::env, &EnvConfig::accel_min);
  sub_dbl("env.accel_max", &RunConfig::env, &EnvConfig::accel_max);
  sub_dbl("env.ttc_threshold", &RunConfig::env, &EnvConfig::ttc_threshold);
  sub_dbl("env.tg_threshold", &RunConfig::env, &EnvConfig::tg_threshold);
  sub_dbl("env.power_scale", &RunConfig::env, &EnvConfig::power_scale);
  sub_dbl("env.hdv_noise_max", &RunConfig::env, &EnvConfig::hdv_noise_max);
  sub_int("env.warmup_steps", &RunConfig::env, &EnvConfig::warmup_steps);
  sub_int("env.refit_interval", &RunConfig::env, &EnvConfig::refit_interval);
  sub_dbl("env.collision_gap", &RunConfig::env, &EnvConfig::collision_gap);
  sub_dbl("env.collision_penalty", &RunConfig::env,
          &EnvConfig::collision_penalty);

  sub_dbl("ddpg.gamma", &RunConfig::ddpg, &DdpgConfig::gamma);
  sub_int("ddpg.batch_size", &RunConfig::ddpg, &DdpgConfig::batch_size);
  sub_dbl("ddpg.lr_actor", &RunConfig::ddpg, &DdpgConfig::lr_actor);
  sub_dbl("ddpg.lr_critic", &RunConfig::ddpg, &DdpgConfig::lr_critic);
  sub_dbl("ddpg.tau", &RunConfig::ddpg, &DdpgConfig::tau);
  sub_dbl("ddpg.sigma_initial", &RunConfig::ddpg, &DdpgConfig::sigma_initial);
  sub_dbl("ddpg.sigma_final", &RunConfig::ddpg, &DdpgConfig::sigma_final);
  sub_dbl("ddpg.sigma_decay_fraction", &RunConfig::ddpg,
          &DdpgConfig::sigma_decay_fraction);
  sub_int("ddpg.episodes", &RunConfig::ddpg, &DdpgConfig::episodes);
  sub_int("ddpg.update_every", &RunConfig::ddpg, &DdpgConfig::update_every);
  f.push_back({"ddpg.buffer_capacity",
               [](const RunConfig& c) {
                 return std::to_string(c.ddpg.buffer_capacity);
               },
               [](RunConfig& c, const std::string& v) {
                 c.ddpg.buffer_capacity =
                     static_cast<std::size_t>(parse_int(v));
               }});
  f.push_back({"ddpg.hidden",
               [](const RunConfig& c) {
                 std::string s;
                 for (std::size_t i = 0; i < c.ddpg.hidden.size(); ++i) {
                   if (i) s += ",";
                   s += std::to_string(c.ddpg.hidden[i]);
                 }
                 return s;
               },
               [](RunConfig& c, const std::string& v) {
                 std::vector<int> widths;
                 std::stringstream ss(v);
                 std::string item;
                 while (std::getline(ss, item, ','))
                   widths.push_back(static_cast<int>(parse_int(trim(item))));
                 if (widths.empty())
                   throw std::invalid_argument("ddpg.hidden must be non-empty");
                 c.ddpg.hidden = widths;
               }});
  f.push_back({"ddpg.optimizer",
               [](const RunConfig& c) {
                 return c.ddpg.optimizer == OptimizerKind::adam ? "adam" : "sgd";
               },
               [](RunConfig& c, const std::string& v) {
                 if (v == "adam") c.ddpg.optimizer = OptimizerKind::adam;
                 else if (v == "sgd") c.ddpg.optimizer = OptimizerKind::sgd;
                 else throw std::invalid_argument("ddpg.optimizer must be adam|sgd");
               }});

  sub_dbl("pv.duration", &RunConfig::pv, &SyntheticProfileSpec::duration);
  sub_dbl("pv.dt", &RunConfig::pv, &SyntheticProfileSpec::dt);
  sub_dbl("pv.speed_min", &RunConfig::pv, &SyntheticProfileSpec::speed_min);
  sub_dbl("pv.speed_max", &RunConfig::pv, &SyntheticProfileSpec::speed_max);
  sub_dbl("pv.smoothness", &RunConfig::pv, &SyntheticProfileSpec::smoothness);
  sub_dbl("pv.accel_limit", &RunConfig::pv, &SyntheticProfileSpec::accel_limit);

  sub_int("gen.episodes", &RunConfig::gen, &GenDataConfig::episodes);
  sub_int("gen.population_size", &RunConfig::gen,
          &GenDataConfig::population_size);
  sub_dbl("gen.truth_v0_min", &RunConfig::gen, &GenDataConfig::truth_v0_min);
  sub_dbl("gen.truth_v0_max", &RunConfig::gen, &GenDataConfig::truth_v0_max);
  sub_dbl("gen.truth_T_min", &RunConfig::gen, &GenDataConfig::truth_T_min);
  sub_dbl("gen.truth_T_max", &RunConfig::gen, &GenDataConfig::truth_T_max);

  sub_int("eval.drivers", &RunConfig::eval, &EvalRunConfig::drivers);
  sub_int("eval.noise_seeds", &RunConfig::eval, &EvalRunConfig::noise_seeds);
  sub_int("eval.heldout_profiles", &RunConfig::eval,
          &EvalRunConfig::heldout_profiles);

  sub_dbl("sim.driver_v0", &RunConfig::sim, &SimRunConfig::driver_v0);
  sub_dbl("sim.driver_T", &RunConfig::sim, &SimRunConfig::driver_T);

  sub_str("paths.corpus", &RunConfig::paths, &Paths::corpus);
  sub_str("paths.population", &RunConfig::paths, &Paths::population);
  sub_str("paths.checkpoint_proposed", &RunConfig::paths,
          &Paths::checkpoint_proposed);
  sub_str("paths.checkpoint_reference", &RunConfig::paths,
          &Paths::checkpoint_reference);
  return f;
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = build_config_fields();
  return fields;
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key,
                      const std::string& value) {
  for (const auto& field : config_fields()) {
    if (field.key == key) {
      field.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return cfg;
}

void echo_config(const RunConfig& cfg, std::ostream& os) {
  for (const auto& field : config_fields())
    os << field.key << " = " << field.get(cfg) << "\n";
}

void SyntheticProfileSpec::validate() const {
  if (duration <= 0.0 || dt <= 0.0)
    throw std::invalid_argument("profile duration and dt must be > 0");
  if (speed_min < 0.0 || speed_min >= speed_max)
    throw std::invalid_argument("profile speed band out of order");
  if (smoothness <= 0.0 || accel_limit <= 0.0)
    throw std::invalid_argument("profile smoothness and accel limit must be > 0");
}

std::vector<double> generate_synthetic_pv(const SyntheticProfileSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(std::lround(spec.duration / spec.dt));
  auto rng = make_rng(derive_seed(spec.seed, {stream::profile}));

  const double mid = 0.5 * (spec.speed_min + spec.speed_max);
  const double quarter = 0.25 * (spec.speed_max - spec.speed_min);
  double v = uniform(rng, mid - quarter, mid + quarter);

  const double accel_sd = std::min(0.8, spec.accel_limit);
  const double decay = std::exp(-spec.dt / spec.smoothness);
  const double noise_sd = accel_sd * std::sqrt(1.0 - decay * decay);
  constexpr double kPull = 0.05;  // 1/s, mean reversion toward the band middle

  std::vector<double> out;
  out.reserve(n);
  double ou = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(v);
    ou = ou * decay + noise_sd * normal(rng);
    const double accel =
        std::clamp(ou + kPull * (mid - v), -spec.accel_limit, spec.accel_limit);
    v = std::clamp(v + accel * spec.dt, spec.speed_min, spec.speed_max);
  }
  return out;
}

SyntheticEpisode make_synthetic_episode(double truth_v0, double truth_T,
                                        const IdmFixedConstants& fixed,
                                        const SyntheticProfileSpec& profile,
                                        std::uint64_t seed) {
  SyntheticProfileSpec leader_spec = profile;
  leader_spec.seed = derive_seed(seed, {stream::corpus, 1});
  const std::vector<double> leader = generate_synthetic_pv(leader_spec);

  SyntheticEpisode out;
  out.truth_v0 = truth_v0;
  out.truth_T = truth_T;
  const IdmParams truth = make_idm_params(truth_v0, truth_T, fixed);

  const double v_start = std::min(leader.front(), 0.95 * truth_v0);
  double gap = 1.5 * idm_equilibrium_gap(truth, v_start);

  auto& ep = out.episode;
  ep.dt = leader_spec.dt;
  ep.leader_speed = leader;
  ep.follower_speed.reserve(leader.size());
  out.gaps.reserve(leader.size());
  double v = v_start;
  for (std::size_t k = 0; k < leader.size(); ++k) {
    ep.follower_speed.push_back(v);
    out.gaps.push_back(gap);
    if (k + 1 == leader.size()) break;
    const double accel = idm_acceleration(truth, v, v - leader[k], gap);
    const double v_next = std::max(0.0, v + accel * ep.dt);
    gap += 0.5 * ((leader[k] - v) + (leader[k + 1] - v_next)) * ep.dt;
    v = v_next;
  }
  ep.initial_gap = out.gaps.front();
  ep.id = "synthetic-" + std::to_string(seed);
  ep.validate();
  return out;
}

void write_episode_csv(const std::string& path, double dt,
                       const std::vector<double>& leader,
                       const std::vector<double>& follower,
                       const std::vector<double>& gaps) {
  if (leader.size() != follower.size() || leader.size() != gaps.size())
    throw std::invalid_argument("episode column lengths differ");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "t,leader_speed,follower_speed,gap\n";
  char tbuf[32];
  for (std::size_t k = 0; k < leader.size(); ++k) {
    std::snprintf(tbuf, sizeof(tbuf), "%.6f", static_cast<double>(k) * dt);
    os << tbuf << ',' << format_double(leader[k]) << ','
       << format_double(follower[k]) << ',' << format_double(gaps[k]) << "\n";
  }
}

std::vector<CarFollowingEpisode> load_episodes(const std::string& dir,
                                               std::ostream& diagnostics) {
  if (!fs::is_directory(dir))
    throw std::runtime_error("corpus directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error("corpus directory has no .csv files: " + dir);

  std::vector<CarFollowingEpisode> episodes;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) {
      diagnostics << file.string() << ": cannot open, skipped\n";
      continue;
    }
    std::string line;
    if (!std::getline(in, line) ||
        trim(line) != "t,leader_speed,follower_speed,gap") {
      diagnostics << file.string() << ":1: bad or missing header, skipped\n";
      continue;
    }
    std::vector<double> t, leader, follower, gaps;
    bool ok = true;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      std::stringstream row(line);
      std::string cell;
      std::vector<double> vals;
      try {
        while (std::getline(row, cell, ',')) vals.push_back(parse_double(trim(cell)));
      } catch (const std::exception& e) {
        diagnostics << file.string() << ":" << lineno << ": " << e.what()
                    << ", file skipped\n";
        ok = false;
        break;
      }
      if (vals.size() != 4) {
        diagnostics << file.string() << ":" << lineno
                    << ": expected 4 columns, file skipped\n";
        ok = false;
        break;
      }
      if (vals[1] < 0.0 || vals[2] < 0.0) {
        diagnostics << file.string() << ":" << lineno
                    << ": negative speed, file skipped\n";
        ok = false;
        break;
      }
      if (vals[3] <= 0.0) {
        diagnostics << file.string() << ":" << lineno
                    << ": non-positive gap, file skipped\n";
        ok = false;
        break;
      }
      t.push_back(vals[0]);
      leader.push_back(vals[1]);
      follower.push_back(vals[2]);
      gaps.push_back(vals[3]);
    }
    if (!ok) continue;
    if (t.size() < 50) {
      diagnostics << file.string() << ": fewer than 50 samples, skipped\n";
      continue;
    }
    CarFollowingEpisode ep;
    ep.dt = t[1] - t[0];
    ep.leader_speed = std::move(leader);
    ep.follower_speed = std::move(follower);
    ep.initial_gap = gaps.front();
    ep.id = file.stem().string();
    try {
      ep.validate();
    } catch (const std::exception& e) {
      diagnostics << file.string() << ": " << e.what() << ", skipped\n";
      continue;
    }
    episodes.push_back(std::move(ep));
  }
  if (episodes.empty())
    throw std::runtime_error("no valid episodes in corpus: " + dir);
  return episodes;
}

void save_population_csv(const DriverPopulation& pop, const std::string& path) {
  pop.validate();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "v0,T\n";
  for (const auto& [v0, T] : pop.entries)
    os << format_double(v0) << ',' << format_double(T) << "\n";
}

DriverPopulation load_population_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open population file " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "v0,T")
    throw std::runtime_error(path + ":1: expected header 'v0,T'");
  DriverPopulation pop;
  pop.jitter_scale = 0.05;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'v0,T'");
    try {
      pop.entries.emplace_back(parse_double(trim(line.substr(0, comma))),
                               parse_double(trim(line.substr(comma + 1))));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  pop.validate();
  return pop;
}

namespace {

void write_paramset(std::ostream& os, const ParamSet& params) {
  for (const auto& layer : params) {
    os << "layer " << layer.in << ' ' << layer.out << "\n";
    os << "w";
    for (double x : layer.w) os << ' ' << format_hex(x);
    os << "\nb";
    for (double x : layer.b) os << ' ' << format_hex(x);
    os << "\n";
  }
}

void write_network(std::ostream& os, const std::string& name,
                   const Network& net) {
  os << "net " << name << ' ' << net.spec.widths.size();
  for (int w : net.spec.widths) os << ' ' << w;
  os << ' '
     << (net.spec.output == OutputActivation::tanh ? "tanh" : "identity")
     << "\n";
  write_paramset(os, net.layers);
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string t;
    if (!(in_ >> t)) throw std::runtime_error("checkpoint truncated");
    return t;
  }
  void expect(const std::string& literal) {
    const std::string t = word();
    if (t != literal)
      throw std::runtime_error("checkpoint malformed: expected '" + literal +
                               "', got '" + t + "'");
  }
  double number() {
    const std::string t = word();
    return parse_double(t);
  }
  long long integer() {
    const std::string t = word();
    return parse_int(t);
  }

 private:
  std::istream& in_;
};

ParamSet read_paramset(TokenReader& r, const std::vector<int>& widths) {
  ParamSet params;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    r.expect("layer");
    LayerParams layer;
    layer.in = static_cast<int>(r.integer());
    layer.out = static_cast<int>(r.integer());
    if (layer.in != widths[l] || layer.out != widths[l + 1])
      throw std::runtime_error("checkpoint layer shape mismatch");
    layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
    layer.b.resize(layer.out);
    r.expect("w");
    for (double& x : layer.w) x = r.number();
    r.expect("b");
    for (double& x : layer.b) x = r.number();
    params.push_back(std::move(layer));
  }
  return params;
}

Network read_network(TokenReader& r, const std::string& name) {
  r.expect("net");
  r.expect(name);
  const auto count = static_cast<std::size_t>(r.integer());
  if (count < 3 || count > 64)
    throw std::runtime_error("checkpoint network shape out of range");
  Network net;
  net.spec.widths.resize(count);
  for (auto& w : net.spec.widths) w = static_cast<int>(r.integer());
  const std::string act = r.word();
  if (act == "tanh") net.spec.output = OutputActivation::tanh;
  else if (act == "identity") net.spec.output = OutputActivation::identity;
  else throw std::runtime_error("checkpoint activation unknown: " + act);
  net.spec.validate();
  net.layers = read_paramset(r, net.spec.widths);
  return net;
}

}  // namespace

void save_checkpoint(const Agent& agent, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    os << "alcc-checkpoint 1\n";
    os << "mode "
       << (agent.mode == RewardMode::proposed ? "proposed" : "reference")
       << "\n";
    os << "optimizer "
       << (agent.cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd") << "\n";
    os << "seed " << agent.cfg.seed << "\n";
    os << "norm " << format_hex(agent.norm.speed_scale) << ' '
       << format_hex(agent.norm.relspeed_scale) << ' '
       << format_hex(agent.norm.gap_scale) << ' '
       << format_hex(agent.norm.action_scale) << "\n";
    write_network(os, "actor", agent.actor);
    write_network(os, "critic", agent.critic);
    write_network(os, "target_actor", agent.target_actor);
    write_network(os, "target_critic", agent.target_critic);
    os << "opt actor " << agent.opt_actor.step << "\n";
    write_paramset(os, agent.opt_actor.m);
    write_paramset(os, agent.opt_actor.v);
    os << "opt critic " << agent.opt_critic.step << "\n";
    write_paramset(os, agent.opt_critic.m);
    write_paramset(os, agent.opt_critic.v);
    os << "end\n";
    if (!os) throw std::runtime_error("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

Agent load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  TokenReader r(in);
  r.expect("alcc-checkpoint");
  const long long version = r.integer();
  if (version != 1)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  Agent agent;
  r.expect("mode");
  const std::string mode = r.word();
  if (mode == "proposed") agent.mode = RewardMode::proposed;
  else if (mode == "reference") agent.mode = RewardMode::reference;
  else throw std::runtime_error("checkpoint mode unknown: " + mode);

  r.expect("optimizer");
  const std::string opt = r.word();
  if (opt == "adam") agent.cfg.optimizer = OptimizerKind::adam;
  else if (opt == "sgd") agent.cfg.optimizer = OptimizerKind::sgd;
  else throw std::runtime_error("checkpoint optimizer unknown: " + opt);

  r.expect("seed");
  agent.cfg.seed = static_cast<std::uint64_t>(r.integer());

  r.expect("norm");
  agent.norm.speed_scale = r.number();
  agent.norm.relspeed_scale = r.number();
  agent.norm.gap_scale = r.number();
  agent.norm.action_scale = r.number();

  agent.actor = read_network(r, "actor");
  agent.critic = read_network(r, "critic");
  agent.target_actor = read_network(r, "target_actor");
  agent.target_critic = read_network(r, "target_critic");

  const int expected_obs = observation_width(agent.mode);
  if (agent.actor.spec.input_width() != expected_obs ||
      agent.critic.spec.input_width() != expected_obs + 1 ||
      agent.target_actor.spec.widths != agent.actor.spec.widths ||
      agent.target_critic.spec.widths != agent.critic.spec.widths)
    throw std::runtime_error("checkpoint state width mismatch for mode " + mode);

  agent.cfg.hidden.assign(agent.actor.spec.widths.begin() + 1,
                          agent.actor.spec.widths.end() - 1);

  r.expect("opt");
  r.expect("actor");
  agent.opt_actor.step = r.integer();
  agent.opt_actor.m = read_paramset(r, agent.actor.spec.widths);
  agent.opt_actor.v = read_paramset(r, agent.actor.spec.widths);
  r.expect("opt");
  r.expect("critic");
  agent.opt_critic.step = r.integer();
  agent.opt_critic.m = read_paramset(r, agent.critic.spec.widths);
  agent.opt_critic.v = read_paramset(r, agent.critic.spec.widths);
  r.expect("end");
  return agent;
}

void write_training_log(const std::vector<EpisodeLog>& log,
                        const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "episode,reward,rolling_mean,driver_v0,driver_T,done_reason\n";
  for (const auto& e : log) {
    os << e.episode << ',' << format_double(e.reward) << ','
       << format_double(e.rolling_mean) << ',' << format_double(e.driver_v0)
       << ',' << format_double(e.driver_T) << ',' << done_reason_name(e.reason)
       << "\n";
  }
}

void write_trace_csv(const EpisodeRollout& roll, double dt,
                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "t,v_pv,v_cav,v_hdv,a_cav,a_hdv,gap01,gap12,r_safe,r_eff,r_cav,r_hdv\n";
  char tbuf[32];
  for (int k = 0; k < roll.steps; ++k) {
    std::snprintf(tbuf, sizeof(tbuf), "%.6f", k * dt);
    os << tbuf << ',' << format_double(roll.v_pv[k]) << ','
       << format_double(roll.v_cav[k]) << ',' << format_double(roll.v_hdv[k])
       << ',' << format_double(roll.a_cav[k]) << ','
       << format_double(roll.a_hdv[k]) << ','
       << format_double(roll.gap_pv_cav[k]) << ','
       << format_double(roll.gap_cav_hdv[k]) << ','
       << format_double(roll.terms[k].safety) << ','
       << format_double(roll.terms[k].efficiency) << ','
       << format_double(roll.terms[k].cav) << ','
       << format_double(roll.terms[k].hdv) << "\n";
  }
}

void write_eval_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "driver_v0,driver_T,cav_a,hdv_a,total_a,cav_b,hdv_b,total_b,"
        "improvement_pct,collided\n";
  for (const auto& r : report.records) {
    os << format_double(r.driver_v0) << ',' << format_double(r.driver_T) << ','
       << format_double(r.cav_a) << ',' << format_double(r.hdv_a) << ','
       << format_double(r.total_a) << ',' << format_double(r.cav_b) << ','
       << format_double(r.hdv_b) << ',' << format_double(r.total_b) << ','
       << format_double(r.improvement_pct) << ','
       << (r.collided ? "true" : "false") << "\n";
  }
}

void write_eval_summary(const EvalReport& report, std::ostream& os) {
  char buf[64];
  auto pct = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  auto kj = [&](double joules) {
    std::snprintf(buf, sizeof(buf), "%.4f", joules / 1000.0);
    return std::string(buf);
  };
  const auto& s = report.summary;
  os << "A: " << report.condition_a << "\n";
  os << "B: " << report.condition_b << "\n";
  os << "compared quantity: " << report.compared << " trip energy\n";
  os << "drivers: " << s.drivers << " (collision episodes excluded: "
     << s.collisions << ")\n";
  os << "mean A: CAV " << kj(s.mean_cav_a) << " kJ, HDV " << kj(s.mean_hdv_a)
     << " kJ, total " << kj(s.mean_total_a) << " kJ\n";
  os << "mean B: CAV " << kj(s.mean_cav_b) << " kJ, HDV " << kj(s.mean_hdv_b)
     << " kJ, total " << kj(s.mean_total_b) << " kJ\n";
  os << "improvement of A over B: mean " << pct(s.mean_improvement)
     << "%, min " << pct(s.min_improvement) << "%, max "
     << pct(s.max_improvement) << "%\n";
  os << "drivers improved: " << pct(100.0 * s.fraction_positive)
     << "%, worsened: " << pct(100.0 * s.fraction_negative) << "%\n";
}

void write_calibration_summary(const std::vector<EpisodeFit>& fits,
                               const std::string& mode_name,
                               const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "episode_id,mode,fitness,v0,T,evaluations\n";
  for (const auto& fit : fits) {
    os << fit.episode_id << ',' << mode_name << ','
       << format_double(fit.fitness) << ','
       << format_double(fit.params.desired_speed) << ','
       << format_double(fit.params.time_gap) << ',' << fit.evaluations << "\n";
  }
}

}  // namespace alcc
