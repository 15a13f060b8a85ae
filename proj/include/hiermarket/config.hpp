#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiermarket/bubble.hpp"
#include "hiermarket/hierarchy.hpp"
#include "hiermarket/params.hpp"
#include "hiermarket/scenario.hpp"

namespace hiermarket {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SweepSpec {
  std::string param;
  std::vector<double> values;
};

struct OutputSpec {
  std::string dir = "out";
  bool write_series = false;
};

/// One experiment manifest: parameters (preset and/or explicit overrides),
/// run shape, optional scenario overlay and sweep, output options.
struct ExperimentConfig {
  ModelParams params;
  HierarchyParams hierarchy;
  long steps = 0;
  long trials = 1;
  std::uint64_t master_seed = 0;
  EchoConfig echo;
  std::optional<PumpDumpConfig> pnd;
  std::optional<SweepSpec> sweep;
  OutputSpec output;
  long burn_in = 0;      // steps discarded before computing metrics
  long downsample = 100; // stride for the bubble tests (one obs per time unit)
  int level = 90;        // significance level for the explosive flag
  std::optional<Preset> preset;
};

namespace detail {

using ParamSetter = std::function<void(ExperimentConfig&, double)>;

inline const std::map<std::string, ParamSetter>& param_setters() {
  static const std::map<std::string, ParamSetter> setters = {
      {"alpha2", [](ExperimentConfig& c, double v) { c.params.alpha2 = v; }},
      {"alpha3", [](ExperimentConfig& c, double v) { c.params.alpha3 = v; }},
      {"v1", [](ExperimentConfig& c, double v) { c.params.v1 = v; }},
      {"v2", [](ExperimentConfig& c, double v) { c.params.v2 = v; }},
      {"beta_price", [](ExperimentConfig& c, double v) { c.params.beta_price = v; }},
      {"r", [](ExperimentConfig& c, double v) { c.params.r = v; }},
      {"R", [](ExperimentConfig& c, double v) { c.params.R = v; }},
      {"s", [](ExperimentConfig& c, double v) { c.params.s = v; }},
      {"p_f", [](ExperimentConfig& c, double v) { c.params.p_f = v; }},
      {"mu_noise", [](ExperimentConfig& c, double v) { c.params.mu_noise = v; }},
      {"gamma", [](ExperimentConfig& c, double v) { c.params.gamma = v; }},
      {"t_c", [](ExperimentConfig& c, double v) { c.params.t_c = v; }},
      {"dt", [](ExperimentConfig& c, double v) { c.params.dt = v; }},
      {"dt_prime", [](ExperimentConfig& c, double v) { c.params.dt_prime = v; }},
      {"tick", [](ExperimentConfig& c, double v) { c.params.tick = v; }},
      {"phi", [](ExperimentConfig& c, double v) { c.hierarchy.phi = v; }},
      {"omega", [](ExperimentConfig& c, double v) { c.hierarchy.omega = v; }},
      {"upsilon", [](ExperimentConfig& c, double v) { c.hierarchy.upsilon = v; }},
      {"b", [](ExperimentConfig& c, double v) { c.hierarchy.b = v; }},
  };
  return setters;
}

inline void reject_unknown_keys(const nlohmann::json& obj,
                                std::initializer_list<const char*> known,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_required(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

template <typename T>
void get_optional(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

}  // namespace detail

/// Override one named real parameter (sweep mechanism). Throws ConfigError
/// for names that do not exist on ModelParams or HierarchyParams.
inline void apply_param(ExperimentConfig& cfg, const std::string& name, double value) {
  auto& setters = detail::param_setters();
  auto it = setters.find(name);
  if (it == setters.end()) throw ConfigError("unknown sweep parameter '" + name + "'");
  it->second(cfg, value);
}

inline Preset parse_preset(const std::string& name) {
  if (name == "SET_II") return Preset::SetII;
  if (name == "SET_III") return Preset::SetIII;
  if (name == "SET_IV") return Preset::SetIV;
  throw ConfigError("unknown preset '" + name + "' (expected SET_II, SET_III or SET_IV)");
}

inline void validate_config(ExperimentConfig& cfg);

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  detail::reject_unknown_keys(j,
                              {"preset", "params", "hierarchy", "steps", "trials",
                               "master_seed", "scenario", "sweep", "output", "burn_in",
                               "downsample", "level"},
                              "config");

  ExperimentConfig cfg;
  if (j.contains("preset")) {
    cfg.preset = parse_preset(detail::get_required<std::string>(j, "preset", "config"));
    cfg.params = preset_params(*cfg.preset);
    cfg.hierarchy = preset_hierarchy(*cfg.preset);
  }

  if (j.contains("params")) {
    const auto& p = j.at("params");
    if (!p.is_object()) throw ConfigError("'params' must be an object");
    for (auto it = p.begin(); it != p.end(); ++it) {
      if (!it.value().is_number())
        throw ConfigError("key '" + it.key() + "' in params must be a number");
      apply_param(cfg, it.key(), it.value().get<double>());
    }
  }

  if (j.contains("hierarchy")) {
    const auto& h = j.at("hierarchy");
    if (!h.is_object()) throw ConfigError("'hierarchy' must be an object");
    detail::reject_unknown_keys(h, {"L", "k", "phi", "omega", "upsilon", "b"}, "hierarchy");
    detail::get_optional(h, "L", cfg.hierarchy.L, "hierarchy");
    detail::get_optional(h, "k", cfg.hierarchy.k, "hierarchy");
    detail::get_optional(h, "phi", cfg.hierarchy.phi, "hierarchy");
    detail::get_optional(h, "omega", cfg.hierarchy.omega, "hierarchy");
    detail::get_optional(h, "upsilon", cfg.hierarchy.upsilon, "hierarchy");
    detail::get_optional(h, "b", cfg.hierarchy.b, "hierarchy");
  }

  cfg.steps = detail::get_required<long>(j, "steps", "config");
  cfg.trials = detail::get_required<long>(j, "trials", "config");
  cfg.master_seed = detail::get_required<std::uint64_t>(j, "master_seed", "config");
  detail::get_optional(j, "burn_in", cfg.burn_in, "config");
  detail::get_optional(j, "downsample", cfg.downsample, "config");
  detail::get_optional(j, "level", cfg.level, "config");

  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    if (!s.is_object()) throw ConfigError("'scenario' must be an object");
    std::string type = detail::get_required<std::string>(s, "type", "scenario");
    if (type == "echo") {
      detail::reject_unknown_keys(s, {"type", "mode", "E"}, "scenario");
      std::string mode = detail::get_required<std::string>(s, "mode", "scenario");
      if (mode == "asymmetric")
        cfg.echo.mode = EchoMode::Asymmetric;
      else if (mode == "symmetric")
        cfg.echo.mode = EchoMode::Symmetric;
      else
        throw ConfigError("scenario mode must be 'asymmetric' or 'symmetric'");
      cfg.echo.E = detail::get_required<double>(s, "E", "scenario");
    } else if (type == "pnd") {
      detail::reject_unknown_keys(s, {"type", "target", "T0", "T1", "S"}, "scenario");
      PumpDumpConfig pnd;
      pnd.target = detail::get_required<long>(s, "target", "scenario");
      pnd.t_begin = detail::get_required<long>(s, "T0", "scenario");
      pnd.t_end = detail::get_required<long>(s, "T1", "scenario");
      pnd.S = detail::get_required<double>(s, "S", "scenario");
      cfg.pnd = pnd;
    } else {
      throw ConfigError("scenario type must be 'echo' or 'pnd'");
    }
  }

  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    if (!s.is_object()) throw ConfigError("'sweep' must be an object");
    detail::reject_unknown_keys(s, {"param", "values"}, "sweep");
    SweepSpec sw;
    sw.param = detail::get_required<std::string>(s, "param", "sweep");
    sw.values = detail::get_required<std::vector<double>>(s, "values", "sweep");
    cfg.sweep = sw;
  }

  if (j.contains("output")) {
    const auto& o = j.at("output");
    if (!o.is_object()) throw ConfigError("'output' must be an object");
    detail::reject_unknown_keys(o, {"dir", "series"}, "output");
    detail::get_optional(o, "dir", cfg.output.dir, "output");
    detail::get_optional(o, "series", cfg.output.write_series, "output");
  }

  validate_config(cfg);
  return cfg;
}

inline void validate_config(ExperimentConfig& cfg) {
  try {
    cfg.params.validate();
    cfg.hierarchy.validate();
    cfg.echo.validate();
    if (cfg.pnd) cfg.pnd->validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.steps < 1000) throw ConfigError("steps must be >= 1000");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.burn_in < 0 || cfg.burn_in >= cfg.steps)
    throw ConfigError("burn_in must lie in [0, steps)");
  if (cfg.downsample < 1) throw ConfigError("downsample must be >= 1");
  if (cfg.level != 90 && cfg.level != 95 && cfg.level != 100)
    throw ConfigError("level must be 90, 95 or 100");
  if (cfg.sweep) {
    if (cfg.sweep->values.empty()) throw ConfigError("sweep values must be non-empty");
    if (!detail::param_setters().contains(cfg.sweep->param))
      throw ConfigError("unknown sweep parameter '" + cfg.sweep->param + "'");
  }
  if (cfg.pnd) {
    auto counts = hierarchy_counts(cfg.hierarchy);
    if (cfg.pnd->target >= counts.communities)
      throw ConfigError("scenario target must be a community (non-leaf) node");
    if (cfg.pnd->t_end > cfg.steps) throw ConfigError("scenario T1 must be <= steps");
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace hiermarket
