#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "swd/optimizers.hpp"
#include "swd/problems.hpp"
#include "swd/schedules.hpp"

namespace swd {

// Preserves key order so serialization is stable.
using Json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fully resolved description of one training run. Defaults follow the
// reference setup: eta 0.001, lambda 0.0005, batch size 128.
struct RunConfig {
  // problem
  std::string problem_name;  // quadratic | logistic | mlp
  std::uint64_t problem_seed = 0;
  std::size_t quad_dim = 10;
  std::string generator;  // two_moons | blobs (logistic / mlp only)
  std::size_t data_n = 512;
  double noise = 0.2;                  // two_moons
  std::vector<ParamVector> centers;    // blobs
  double spread = 1.0;                 // blobs
  std::vector<std::size_t> hidden{16}; // mlp
  Activation activation = Activation::tanh_act;

  // optimizer
  OptimizerKind kind = OptimizerKind::sgd;
  DecayMode mode = DecayMode::none;
  HyperParams hp;

  ScheduleSpec schedule;  // steps_per_epoch is resolved by the runner

  long long epochs = 1;
  long long batch_size = 128;
  long long log_every = 100;
  std::uint64_t seed = 0;
  std::string out_dir;  // optional; the CLI --out flag takes precedence
};

struct SweepGrid {
  std::vector<double> lambdas;   // empty = keep the base value
  std::vector<double> etas;
  std::vector<DecayMode> modes;
};

namespace detail {

inline void check_keys(const Json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline double get_num(const Json& obj, const std::string& where, const char* key,
                      double fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline long long get_int(const Json& obj, const std::string& where, const char* key,
                         long long fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_integer())
    throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<long long>();
}

inline std::uint64_t get_u64(const Json& obj, const std::string& where, const char* key,
                             std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<long long>() < 0))
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string get_str(const Json& obj, const std::string& where, const char* key,
                           const std::string& fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(where + ": missing required key '" + key + "'");
    return fallback;
  }
  const Json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline bool get_bool(const Json& obj, const std::string& where, const char* key,
                     bool fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
  return v.get<bool>();
}

template <class Fn>
inline auto wrap_config(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const Json& root) {
  using detail::check_keys;
  RunConfig cfg;
  check_keys(root, "config",
             {"problem", "optimizer", "schedule", "epochs", "batch_size", "log_every",
              "seed", "out_dir"});
  if (!root.contains("problem")) throw ConfigError("config: missing 'problem'");
  if (!root.contains("optimizer")) throw ConfigError("config: missing 'optimizer'");

  // ---- problem ----
  const Json& p = root.at("problem");
  cfg.problem_name = detail::get_str(p, "problem", "name", "", true);
  cfg.problem_seed = detail::get_u64(p, "problem", "seed", 0);
  if (cfg.problem_name == "quadratic") {
    check_keys(p, "problem", {"name", "seed", "dim"});
    const long long d = detail::get_int(p, "problem", "dim", 10);
    if (d < 1) throw ConfigError("problem.dim: must be >= 1");
    cfg.quad_dim = static_cast<std::size_t>(d);
  } else if (cfg.problem_name == "logistic" || cfg.problem_name == "mlp") {
    if (cfg.problem_name == "logistic")
      check_keys(p, "problem", {"name", "seed", "dataset"});
    else
      check_keys(p, "problem", {"name", "seed", "dataset", "hidden", "activation"});
    if (!p.contains("dataset")) throw ConfigError("problem: missing 'dataset'");
    const Json& ds = p.at("dataset");
    cfg.generator = detail::get_str(ds, "problem.dataset", "generator", "", true);
    const long long n = detail::get_int(ds, "problem.dataset", "n", 512);
    if (n < 4) throw ConfigError("problem.dataset.n: must be >= 4");
    cfg.data_n = static_cast<std::size_t>(n);
    if (cfg.generator == "two_moons") {
      check_keys(ds, "problem.dataset", {"generator", "n", "noise"});
      cfg.noise = detail::get_num(ds, "problem.dataset", "noise", 0.2);
      if (!(cfg.noise >= 0.0)) throw ConfigError("problem.dataset.noise: must be >= 0");
    } else if (cfg.generator == "blobs") {
      check_keys(ds, "problem.dataset", {"generator", "n", "centers", "spread"});
      cfg.spread = detail::get_num(ds, "problem.dataset", "spread", 1.0);
      if (!(cfg.spread > 0.0)) throw ConfigError("problem.dataset.spread: must be > 0");
      if (!ds.contains("centers")) throw ConfigError("problem.dataset: missing 'centers'");
      const Json& cs = ds.at("centers");
      if (!cs.is_array() || cs.size() < 2)
        throw ConfigError("problem.dataset.centers: expected >= 2 center vectors");
      for (const Json& c : cs) {
        if (!c.is_array() || c.empty())
          throw ConfigError("problem.dataset.centers: each center must be a number array");
        ParamVector center;
        for (const Json& x : c) {
          if (!x.is_number())
            throw ConfigError("problem.dataset.centers: entries must be numbers");
          center.push_back(x.get<double>());
        }
        if (!cfg.centers.empty() && center.size() != cfg.centers[0].size())
          throw ConfigError("problem.dataset.centers: centers differ in dimension");
        cfg.centers.push_back(std::move(center));
      }
    } else {
      throw ConfigError("problem.dataset.generator: unknown generator '" + cfg.generator +
                        "'");
    }
    if (cfg.problem_name == "mlp") {
      if (p.contains("hidden")) {
        const Json& h = p.at("hidden");
        if (!h.is_array() || h.empty())
          throw ConfigError("problem.hidden: expected a non-empty integer array");
        cfg.hidden.clear();
        for (const Json& x : h) {
          if (!x.is_number_integer() || x.get<long long>() < 1)
            throw ConfigError("problem.hidden: widths must be positive integers");
          cfg.hidden.push_back(static_cast<std::size_t>(x.get<long long>()));
        }
      }
      cfg.activation = detail::wrap_config("problem.activation", [&] {
        return activation_from(detail::get_str(p, "problem", "activation", "tanh"));
      });
    }
  } else {
    throw ConfigError("problem.name: unknown problem '" + cfg.problem_name + "'");
  }

  // ---- optimizer ----
  const Json& o = root.at("optimizer");
  check_keys(o, "optimizer",
             {"kind", "mode", "eta", "lambda", "beta1", "beta2", "beta3", "epsilon",
              "beta0", "exact_swd_factor"});
  cfg.kind = detail::wrap_config("optimizer.kind", [&] {
    return optimizer_kind_from(detail::get_str(o, "optimizer", "kind", "", true));
  });
  cfg.mode = detail::wrap_config("optimizer.mode", [&] {
    return decay_mode_from(detail::get_str(o, "optimizer", "mode", "", true));
  });
  cfg.hp.eta = detail::get_num(o, "optimizer", "eta", 0.001);
  cfg.hp.lambda = detail::get_num(o, "optimizer", "lambda", 0.0005);
  cfg.hp.beta1 = detail::get_num(o, "optimizer", "beta1", 0.9);
  cfg.hp.beta2 = detail::get_num(o, "optimizer", "beta2", 0.999);
  cfg.hp.beta3 = detail::get_num(o, "optimizer", "beta3", 1.0);
  cfg.hp.epsilon = detail::get_num(o, "optimizer", "epsilon", 1e-8);
  cfg.hp.beta0 = detail::get_num(o, "optimizer", "beta0", 0.1);
  cfg.hp.exact_swd_factor = detail::get_bool(o, "optimizer", "exact_swd_factor", false);
  detail::wrap_config("optimizer", [&] { cfg.hp.validate(); return 0; });
  if (!decay_mode_valid(cfg.kind, cfg.mode))
    throw ConfigError("optimizer: decay mode '" + std::string(to_string(cfg.mode)) +
                      "' is not valid for kind '" + std::string(to_string(cfg.kind)) + "'");
  if ((cfg.mode == DecayMode::vanilla || cfg.mode == DecayMode::plain) &&
      (cfg.hp.beta1 != 0.0 || cfg.hp.beta3 != 1.0))
    throw ConfigError("optimizer: vanilla/plain decay requires beta1 = 0 and beta3 = 1");

  // ---- schedule ----
  cfg.schedule.kind = ScheduleKind::constant;
  cfg.schedule.eta0 = cfg.hp.eta;
  if (root.contains("schedule")) {
    const Json& s = root.at("schedule");
    const std::string kind = detail::get_str(s, "schedule", "kind", "constant");
    cfg.schedule.kind = detail::wrap_config("schedule.kind",
                                            [&] { return schedule_kind_from(kind); });
    switch (cfg.schedule.kind) {
      case ScheduleKind::constant:
        check_keys(s, "schedule", {"kind", "eta0"});
        break;
      case ScheduleKind::milestones: {
        check_keys(s, "schedule", {"kind", "eta0", "milestones", "decay_factor"});
        if (!s.contains("milestones")) throw ConfigError("schedule: missing 'milestones'");
        const Json& ms = s.at("milestones");
        if (!ms.is_array()) throw ConfigError("schedule.milestones: expected an array");
        for (const Json& m : ms) {
          if (!m.is_number_integer())
            throw ConfigError("schedule.milestones: entries must be integers");
          cfg.schedule.milestones.push_back(m.get<long long>());
        }
        cfg.schedule.decay_factor = detail::get_num(s, "schedule", "decay_factor", 0.1);
        break;
      }
      case ScheduleKind::cosine_restarts:
        check_keys(s, "schedule", {"kind", "eta0", "eta_min", "t0", "t_mult"});
        cfg.schedule.eta_min = detail::get_num(s, "schedule", "eta_min", 0.0);
        cfg.schedule.t0 = detail::get_int(s, "schedule", "t0", 14);
        cfg.schedule.t_mult = detail::get_int(s, "schedule", "t_mult", 2);
        break;
    }
    cfg.schedule.eta0 = detail::get_num(s, "schedule", "eta0", cfg.hp.eta);
  }
  detail::wrap_config("schedule", [&] { cfg.schedule.validate(); return 0; });

  cfg.epochs = detail::get_int(root, "config", "epochs", 1);
  if (cfg.epochs < 1) throw ConfigError("epochs: must be >= 1");
  cfg.batch_size = detail::get_int(root, "config", "batch_size", 128);
  if (cfg.batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  cfg.log_every = detail::get_int(root, "config", "log_every", 100);
  if (cfg.log_every < 1) throw ConfigError("log_every: must be >= 1");
  cfg.seed = detail::get_u64(root, "config", "seed", 0);
  cfg.out_dir = detail::get_str(root, "config", "out_dir", "");
  return cfg;
}

// Resolved serialization: every field explicit, fixed key order, so
// parse(serialize(cfg)) reproduces cfg and re-serializes byte-identically.
inline Json serialize_run_config(const RunConfig& cfg) {
  Json p;
  p["name"] = cfg.problem_name;
  p["seed"] = cfg.problem_seed;
  if (cfg.problem_name == "quadratic") {
    p["dim"] = cfg.quad_dim;
  } else {
    Json ds;
    ds["generator"] = cfg.generator;
    ds["n"] = cfg.data_n;
    if (cfg.generator == "two_moons") {
      ds["noise"] = cfg.noise;
    } else {
      ds["centers"] = cfg.centers;
      ds["spread"] = cfg.spread;
    }
    p["dataset"] = std::move(ds);
    if (cfg.problem_name == "mlp") {
      p["hidden"] = cfg.hidden;
      p["activation"] = std::string(to_string(cfg.activation));
    }
  }

  Json o;
  o["kind"] = std::string(to_string(cfg.kind));
  o["mode"] = std::string(to_string(cfg.mode));
  o["eta"] = cfg.hp.eta;
  o["lambda"] = cfg.hp.lambda;
  o["beta1"] = cfg.hp.beta1;
  o["beta2"] = cfg.hp.beta2;
  o["beta3"] = cfg.hp.beta3;
  o["epsilon"] = cfg.hp.epsilon;
  o["beta0"] = cfg.hp.beta0;
  o["exact_swd_factor"] = cfg.hp.exact_swd_factor;

  Json s;
  s["kind"] = std::string(to_string(cfg.schedule.kind));
  s["eta0"] = cfg.schedule.eta0;
  switch (cfg.schedule.kind) {
    case ScheduleKind::constant:
      break;
    case ScheduleKind::milestones:
      s["milestones"] = cfg.schedule.milestones;
      s["decay_factor"] = cfg.schedule.decay_factor;
      break;
    case ScheduleKind::cosine_restarts:
      s["eta_min"] = cfg.schedule.eta_min;
      s["t0"] = cfg.schedule.t0;
      s["t_mult"] = cfg.schedule.t_mult;
      break;
  }

  Json root;
  root["problem"] = std::move(p);
  root["optimizer"] = std::move(o);
  root["schedule"] = std::move(s);
  root["epochs"] = cfg.epochs;
  root["batch_size"] = cfg.batch_size;
  root["log_every"] = cfg.log_every;
  root["seed"] = cfg.seed;
  if (!cfg.out_dir.empty()) root["out_dir"] = cfg.out_dir;
  return root;
}

inline Json parse_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
  return j;
}

inline RunConfig load_run_config(const std::string& path) {
  return parse_run_config(parse_json_file(path));
}

inline SweepGrid parse_sweep_grid(const Json& root) {
  detail::check_keys(root, "grid", {"lambda", "eta", "mode"});
  SweepGrid g;
  auto read_nums = [&](const char* key, std::vector<double>& out) {
    if (!root.contains(key)) return;
    const Json& a = root.at(key);
    if (!a.is_array() || a.empty())
      throw ConfigError(std::string("grid.") + key + ": expected a non-empty array");
    for (const Json& x : a) {
      if (!x.is_number())
        throw ConfigError(std::string("grid.") + key + ": entries must be numbers");
      out.push_back(x.get<double>());
    }
  };
  read_nums("lambda", g.lambdas);
  read_nums("eta", g.etas);
  if (root.contains("mode")) {
    const Json& a = root.at("mode");
    if (!a.is_array() || a.empty())
      throw ConfigError("grid.mode: expected a non-empty array");
    for (const Json& x : a) {
      if (!x.is_string()) throw ConfigError("grid.mode: entries must be strings");
      g.modes.push_back(detail::wrap_config(
          "grid.mode", [&] { return decay_mode_from(x.get<std::string>()); }));
    }
  }
  if (g.lambdas.empty() && g.etas.empty() && g.modes.empty())
    throw ConfigError("grid: at least one of lambda/eta/mode must be given");
  return g;
}

inline SweepGrid load_sweep_grid(const std::string& path) {
  return parse_sweep_grid(parse_json_file(path));
}

}  // namespace swd
