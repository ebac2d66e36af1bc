#pragma once

// Scenario configuration: built-in reproductions and a flat sectioned
// key = value file format (TOML-compatible subset).
//
//   [model]      variant = "slow_survival" | "rescaled"
//                kind = "complete_vs_reduced" | "local_vs_global" | "variant_comparison"
//                q = 3, r = 2 (optional; only three stages in two patches are supported)
//   [params]     s1_1 s1_2 s2_1 s2_2 s3_1 s3_2 phi_1 phi_2 c_1 c_2 d_1 d_2
//   [dispersal]  v1_1 v2_1 v3_1, optional theta_1 theta_2 theta_3 (number or "max")
//   [run]        k_list = [1, 5, 10], horizon, tail, seed
//   [init]       x = [x1_1, x1_2, x2_1, x2_2, x3_1, x3_2]
//   [expect]     reduced = "equilibrium" | "two_cycle", local = ..., k_convergence = true,
//                max_relative_distance = 0.05

#include "slowfast/analysis.hpp"
#include "slowfast/threestage.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace slowfast::cli {

using analysis::OrbitKind;
using threestage::ThreeStageParams;

enum class ScenarioKind { complete_vs_reduced, local_vs_global, variant_comparison };

inline std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::complete_vs_reduced: return "complete_vs_reduced";
    case ScenarioKind::local_vs_global: return "local_vs_global";
    case ScenarioKind::variant_comparison: return "variant_comparison";
  }
  return "unknown";
}

struct Expectations {
  std::optional<OrbitKind> reduced;
  std::optional<OrbitKind> local;
  bool k_convergence = false;
  std::optional<double> max_relative_distance;
};

struct ScenarioConfig {
  std::string name;
  ScenarioKind kind = ScenarioKind::complete_vs_reduced;
  Variant variant = Variant::slow;
  ThreeStageParams params;
  std::vector<int> k_list{1};
  long horizon = 1000;
  int tail = 8;
  Vector x0 = Vector::Zero(6);
  std::uint64_t seed = 42;
  Expectations expect;
  bool reversal_example = false;  // append the reversed-ordering analysis
};

inline Error config_error(const std::string& field, const std::string& reason) {
  return Error(ErrorCode::config_invalid, field + ": " + reason);
}

/// Checks a config before any run.
inline void validate(const ScenarioConfig& cfg) {
  try {
    threestage::validate(cfg.params);
  } catch (const Error& e) {
    throw config_error("params", e.what());
  }
  if (cfg.k_list.empty()) throw config_error("run.k_list", "must be nonempty");
  for (int k : cfg.k_list) {
    if (k < 1) throw config_error("run.k_list", "each k must be >= 1");
  }
  if (cfg.horizon < 1) throw config_error("run.horizon", "must be >= 1");
  if (cfg.tail < 1) throw config_error("run.tail", "must be >= 1");
  if (cfg.tail > cfg.horizon + 1) throw config_error("run.tail", "exceeds the number of simulated states");
  if (cfg.x0.size() != 6) throw config_error("init.x", "needs 6 entries");
  if (!cfg.x0.allFinite() || cfg.x0.minCoeff() < 0.0) throw config_error("init.x", "entries must be finite and >= 0");
  if (cfg.x0.sum() <= 0.0) throw config_error("init.x", "initial population must be positive");
}

// ---------------------------------------------------------------------------
// Built-in scenarios

struct ScenarioInfo {
  std::string_view name;
  std::string_view description;
};

inline constexpr std::array<ScenarioInfo, 5> kScenarios{{
    {"fig2", "isolated patches cycle, connected patches settle on an equilibrium (slow survival)"},
    {"fig3", "isolated patches settle on equilibria, connected patches cycle (slow survival)"},
    {"fig10", "complete rescaled system for k in {1,5,10} against its reduced 2-cycle"},
    {"sec42_compare", "R0 ordering between the two survival variants, reversal threshold, extinction flip"},
    {"custom", "user parameters; run <config-path> or the built-in template"},
}};

inline Vector figure_initial_state() {
  Vector x(6);
  x << 0.02, 0.02, 0.05, 0.05, 0.02, 0.02;
  return x;
}

inline ThreeStageParams fig10_params() {
  ThreeStageParams p;
  p.survival = {{{0.3, 0.5}, {0.47, 0.5}, {0.7, 0.5}}};
  p.fertility = {3.8, 3.5};
  p.fertility_crowding = {1.0, 1.0};
  p.activation_crowding = {5.3, 5.6};
  p.perron_fraction = {0.3, 0.25, 0.1};
  // Strongest mixing that keeps each dispersal matrix primitive; the Perron
  // fractions are unchanged.
  for (int i = 0; i < 3; ++i) p.mixing[i] = 0.999 * threestage::max_mixing(p.perron_fraction[i]);
  return p;
}

inline ThreeStageParams fig2_params() {
  return ThreeStageParams::homogeneous(0.5, 0.5, 0.5, 3.1, 1.0, 10.0, {0.3, 7.0 / 8.0, 1.0 / 8.0});
}

inline ThreeStageParams fig3_params() {
  return ThreeStageParams::homogeneous(0.5, 0.5, 0.5, 3.0003, 1.0, 5.5, {0.3, 3.0 / 8.0, 1.0 / 8.0});
}

/// Equal fertilities with strongly patch-dependent survival: the rescaled
/// variant goes extinct while the slow variant persists.
inline ThreeStageParams extinction_flip_params() {
  ThreeStageParams p = ThreeStageParams::homogeneous(0.2, 0.2, 0.2, 3.0, 1.0, 5.0, {0.5, 0.5, 0.5});
  for (auto& s : p.survival) s[1] = 0.9;
  return p;
}

inline ScenarioConfig builtin_config(std::string_view name) {
  ScenarioConfig cfg;
  cfg.name = std::string(name);
  cfg.x0 = figure_initial_state();
  if (name == "fig10") {
    cfg.kind = ScenarioKind::complete_vs_reduced;
    cfg.variant = Variant::rescaled;
    cfg.params = fig10_params();
    cfg.k_list = {1, 5, 10};
    cfg.horizon = 10000;
    cfg.tail = 6;
    cfg.expect.reduced = OrbitKind::two_cycle;
    cfg.expect.k_convergence = true;
    cfg.expect.max_relative_distance = 0.05;
  } else if (name == "fig2" || name == "fig3") {
    cfg.kind = ScenarioKind::local_vs_global;
    cfg.variant = Variant::slow;
    cfg.params = name == "fig2" ? fig2_params() : fig3_params();
    cfg.k_list = {1, 10};
    cfg.horizon = 1000000;
    cfg.tail = 8;
    cfg.expect.reduced = name == "fig2" ? OrbitKind::equilibrium : OrbitKind::two_cycle;
    cfg.expect.local = name == "fig2" ? OrbitKind::two_cycle : OrbitKind::equilibrium;
  } else if (name == "sec42_compare") {
    cfg.kind = ScenarioKind::variant_comparison;
    cfg.variant = Variant::rescaled;
    cfg.params = extinction_flip_params();
    cfg.horizon = 100000;
    cfg.tail = 8;
    cfg.reversal_example = true;
  } else if (name == "custom") {
    cfg.kind = ScenarioKind::complete_vs_reduced;
    cfg.variant = Variant::slow;
    cfg.params = fig2_params();
    cfg.k_list = {1, 2, 5};
    cfg.horizon = 10000;
    cfg.tail = 8;
  } else {
    throw config_error("scenario", "unknown built-in '" + std::string(name) + "'");
  }
  return cfg;
}

inline bool is_builtin(std::string_view name) {
  return std::any_of(kScenarios.begin(), kScenarios.end(), [name](const auto& s) { return s.name == name; });
}

// ---------------------------------------------------------------------------
// File format

namespace detail {

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Drops a trailing comment outside quotes.
inline std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return trim(s.substr(0, i));
  }
  return trim(s);
}

inline double parse_number(const std::string& field, const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw config_error(field, "expected a number, got '" + s + "'");
  }
  return v;
}

inline long parse_integer(const std::string& field, const std::string& raw) {
  const double v = parse_number(field, raw);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw config_error(field, "expected an integer");
  return static_cast<long>(v);
}

inline std::string parse_string(const std::string& field, const std::string& raw) {
  const std::string s = trim(raw);
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') throw config_error(field, "expected a quoted string");
  return s.substr(1, s.size() - 2);
}

inline std::vector<double> parse_array(const std::string& field, const std::string& raw) {
  const std::string s = trim(raw);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') throw config_error(field, "expected an array [a, b, ...]");
  std::vector<double> out;
  std::string body = s.substr(1, s.size() - 2);
  std::size_t start = 0;
  while (start <= body.size()) {
    const std::size_t comma = body.find(',', start);
    const std::string item = trim(body.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(parse_number(field, item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_bool(const std::string& field, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true") return true;
  if (s == "false") return false;
  throw config_error(field, "expected true or false");
}

inline OrbitKind parse_orbit_kind(const std::string& field, const std::string& raw) {
  const std::string s = parse_string(field, raw);
  if (s == "equilibrium") return OrbitKind::equilibrium;
  if (s == "two_cycle") return OrbitKind::two_cycle;
  throw config_error(field, "expected \"equilibrium\" or \"two_cycle\"");
}

}  // namespace detail

/// Parses a scenario from a config stream. `name` labels the run.
inline ScenarioConfig parse_config(std::istream& in, const std::string& name) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw config_error("file", e.message() + " at line " + std::to_string(e.line()));
  }

  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw config_error(section, "keys must live inside a [section]");
    for (const auto& [key, node] : body) values[section + "." + key] = detail::strip_comment(node.data());
  }
  std::set<std::string> used;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    used.insert(key);
    return it->second;
  };
  auto require = [&](const std::string& key) {
    auto v = take(key);
    if (!v) throw config_error(key, "missing");
    return *v;
  };

  ScenarioConfig cfg;
  cfg.name = name;
  cfg.k_list = {1};

  if (auto v = take("model.variant")) {
    const std::string s = detail::parse_string("model.variant", *v);
    if (s == "slow_survival") cfg.variant = Variant::slow;
    else if (s == "rescaled") cfg.variant = Variant::rescaled;
    else throw config_error("model.variant", "expected \"slow_survival\" or \"rescaled\"");
  }
  if (auto v = take("model.kind")) {
    const std::string s = detail::parse_string("model.kind", *v);
    if (s == "complete_vs_reduced") cfg.kind = ScenarioKind::complete_vs_reduced;
    else if (s == "local_vs_global") cfg.kind = ScenarioKind::local_vs_global;
    else if (s == "variant_comparison") cfg.kind = ScenarioKind::variant_comparison;
    else throw config_error("model.kind", "unknown scenario kind '" + s + "'");
  }
  if (auto v = take("model.q"); v && detail::parse_integer("model.q", *v) != 3) {
    throw config_error("model.q", "only three stages are supported");
  }
  if (auto v = take("model.r"); v && detail::parse_integer("model.r", *v) != 2) {
    throw config_error("model.r", "only two patches are supported");
  }

  ThreeStageParams& p = cfg.params;
  for (int i = 0; i < 3; ++i) {
    for (int a = 0; a < 2; ++a) {
      const std::string key = "params.s" + std::to_string(i + 1) + "_" + std::to_string(a + 1);
      p.survival[i][a] = detail::parse_number(key, require(key));
    }
  }
  for (int a = 0; a < 2; ++a) {
    const std::string suffix = "_" + std::to_string(a + 1);
    p.fertility[a] = detail::parse_number("params.phi" + suffix, require("params.phi" + suffix));
    p.fertility_crowding[a] = detail::parse_number("params.c" + suffix, require("params.c" + suffix));
    p.activation_crowding[a] = detail::parse_number("params.d" + suffix, require("params.d" + suffix));
  }
  for (int i = 0; i < 3; ++i) {
    const std::string vkey = "dispersal.v" + std::to_string(i + 1) + "_1";
    p.perron_fraction[i] = detail::parse_number(vkey, require(vkey));
    const std::string tkey = "dispersal.theta_" + std::to_string(i + 1);
    if (auto v = take(tkey)) {
      const std::string s = detail::trim(*v);
      if (s == "\"max\"") {
        const double f = p.perron_fraction[i];
        if (!(f > 0.0 && f < 1.0)) throw config_error(vkey, "must lie in (0,1)");
        p.mixing[i] = 0.999 * threestage::max_mixing(f);
      } else {
        p.mixing[i] = detail::parse_number(tkey, s);
      }
    }
  }

  if (auto v = take("run.k_list")) {
    cfg.k_list.clear();
    for (double k : detail::parse_array("run.k_list", *v)) {
      if (k != std::floor(k)) throw config_error("run.k_list", "entries must be integers");
      cfg.k_list.push_back(static_cast<int>(k));
    }
  }
  if (auto v = take("run.horizon")) cfg.horizon = detail::parse_integer("run.horizon", *v);
  if (auto v = take("run.tail")) cfg.tail = static_cast<int>(detail::parse_integer("run.tail", *v));
  if (auto v = take("run.seed")) {
    const long s = detail::parse_integer("run.seed", *v);
    if (s < 0) throw config_error("run.seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  {
    const auto x = detail::parse_array("init.x", require("init.x"));
    cfg.x0 = Vector::Map(x.data(), static_cast<Index>(x.size()));
  }

  if (auto v = take("expect.reduced")) cfg.expect.reduced = detail::parse_orbit_kind("expect.reduced", *v);
  if (auto v = take("expect.local")) cfg.expect.local = detail::parse_orbit_kind("expect.local", *v);
  if (auto v = take("expect.k_convergence")) cfg.expect.k_convergence = detail::parse_bool("expect.k_convergence", *v);
  if (auto v = take("expect.max_relative_distance")) {
    cfg.expect.max_relative_distance = detail::parse_number("expect.max_relative_distance", *v);
  }

  for (const auto& [key, value] : values) {
    if (!used.count(key)) throw config_error(key, "unknown key");
  }
  validate(cfg);
  return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  return parse_config(in, path.stem().string());
}

/// A built-in name or a config path.
inline ScenarioConfig resolve_scenario(const std::string& target) {
  if (is_builtin(target)) {
    ScenarioConfig cfg = builtin_config(target);
    validate(cfg);
    return cfg;
  }
  if (!std::filesystem::exists(target)) {
    throw config_error("scenario", "'" + target + "' is neither a built-in scenario nor an existing file");
  }
  return load_config(target);
}

}  // namespace slowfast::cli
