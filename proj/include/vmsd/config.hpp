#pragma once

// Run configuration: INI-style "key = value" lines grouped in [sections].
//
//   [run]     scenario (required), degree, c_delta, seed
//   [mesh]    M, nx, nv (required), T, x_min, x_max, v_min, v_max
//   [picard]  tol, max_iter
//   [study]   levels
//   [verify]  samples, paths, mutate_phi2
//   [output]  dir
//
// Unset domain keys fall back to the scenario's defaults.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "vmsd/errors.hpp"
#include "vmsd/scenarios.hpp"

namespace vmsd {

struct RunConfig {
  std::string scenario;
  int degree = 1;
  double c_delta = 0.5;
  std::uint64_t seed = 1;

  int M = 0, nx = 0, nv = 0;
  std::optional<double> T, x_min, x_max, v_min, v_max;

  double picard_tol = 1e-8;
  int picard_max_iter = 25;

  int levels = 3;

  int verify_samples = 20;
  int verify_paths = 100;
  bool mutate_phi2 = false;

  std::string out_dir = "out";

  std::uint64_t hash = 0;  // of the configuration text

  /// Scenario with the configured horizon and box applied.
  Scenario scenario_data() const {
    Scenario s = make_scenario(scenario);
    if (T) s.T = *T;
    if (x_min) s.box.x.lo = *x_min;
    if (x_max) s.box.x.hi = *x_max;
    if (v_min) s.box.v1.lo = s.box.v2.lo = *v_min;
    if (v_max) s.box.v1.hi = s.box.v2.hi = *v_max;
    return s;
  }

  SlabMesh mesh() const {
    const Scenario s = scenario_data();
    return build_uniform(s.T, M, nx, nv, s.box);
  }
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

namespace detail {

template <class T>
T config_value(const boost::property_tree::ptree& sec, const std::string& section, const std::string& key) {
  const std::string raw = sec.get<std::string>(key);
  std::istringstream is(raw);
  T v{};
  is >> std::boolalpha >> v;
  std::string rest;
  if (is.fail() || (is >> rest)) throw ConfigError("config: key '" + section + "." + key + "' has invalid value '" + raw + "'");
  return v;
}

}  // namespace detail

/// Parses configuration text. `origin` names the source in diagnostics.
inline RunConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  static const std::map<std::string, std::set<std::string>> known{
      {"run", {"scenario", "degree", "c_delta", "seed"}},
      {"mesh", {"M", "nx", "nv", "T", "x_min", "x_max", "v_min", "v_max"}},
      {"picard", {"tol", "max_iter"}},
      {"study", {"levels"}},
      {"verify", {"samples", "paths", "mutate_phi2"}},
      {"output", {"dir"}}};
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(origin + ": key '" + section + "' outside of a section");
    auto it = known.find(section);
    if (it == known.end()) throw ConfigError(origin + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError(origin + ": unknown key '" + key + "' in section [" + section + "]");
  }
  for (const char* req : {"run.scenario", "mesh.M", "mesh.nx", "mesh.nv"})
    if (!tree.get_optional<std::string>(pt::ptree::path_type(req, '.')))
      throw ConfigError(origin + ": missing required key '" + std::string(req) + "'");

  RunConfig c;
  c.hash = fnv1a(text);
  auto sec = [&](const char* name) -> const pt::ptree& {
    static const pt::ptree empty;
    auto s = tree.get_child_optional(name);
    return s ? *s : empty;
  };
  auto opt = [&]<class T>(const char* section, const char* key, T& target) {
    if (sec(section).count(key)) target = detail::config_value<T>(sec(section), section, key);
  };
  auto optd = [&](const char* section, const char* key, std::optional<double>& target) {
    if (sec(section).count(key)) target = detail::config_value<double>(sec(section), section, key);
  };

  c.scenario = sec("run").get<std::string>("scenario");
  make_scenario(c.scenario);  // rejects unknown names
  opt("run", "degree", c.degree);
  opt("run", "c_delta", c.c_delta);
  opt("run", "seed", c.seed);
  opt("mesh", "M", c.M);
  opt("mesh", "nx", c.nx);
  opt("mesh", "nv", c.nv);
  optd("mesh", "T", c.T);
  optd("mesh", "x_min", c.x_min);
  optd("mesh", "x_max", c.x_max);
  optd("mesh", "v_min", c.v_min);
  optd("mesh", "v_max", c.v_max);
  opt("picard", "tol", c.picard_tol);
  opt("picard", "max_iter", c.picard_max_iter);
  opt("study", "levels", c.levels);
  opt("verify", "samples", c.verify_samples);
  opt("verify", "paths", c.verify_paths);
  opt("verify", "mutate_phi2", c.mutate_phi2);
  if (sec("output").count("dir")) c.out_dir = sec("output").get<std::string>("dir");

  auto require = [&](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(origin + ": " + what);
  };
  require(c.degree >= 0 && c.degree <= 3, "run.degree must be in 0..3");
  require(c.c_delta > 0.0, "run.c_delta must be positive");
  require(c.M >= 1 && c.nx >= 1 && c.nv >= 1, "mesh.M, mesh.nx, mesh.nv must be >= 1");
  require(!c.T || *c.T > 0.0, "mesh.T must be positive");
  require(c.picard_tol > 0.0, "picard.tol must be positive");
  require(c.picard_max_iter >= 1, "picard.max_iter must be >= 1");
  require(c.levels >= 1, "study.levels must be >= 1");
  require(c.verify_samples >= 0 && c.verify_paths >= 0, "verify.samples and verify.paths must be >= 0");
  const Scenario s = c.scenario_data();
  require(s.box.x.length() > 0.0, "mesh.x_min must be below mesh.x_max");
  require(s.box.v1.length() > 0.0, "mesh.v_min must be below mesh.v_max");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace vmsd
