#pragma once

#include <fstream>
#include <istream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "protograv/errors.hpp"

namespace protograv {

// Flat key = value configuration with optional cosmetic [section] headers
// (scenario, grid, params, outputs). Every key has a documented default;
// unknown keys are hard errors with a line diagnostic.
struct Config {
  std::string scenario;  // vacuum | flat_dirac_packet | weakfield_packet |
                         // boost_degeneracy | higgs_relax | einstein_residual
  int nx = 256;
  double dx = 0.5;
  double dt = 0.05;
  int steps = 1000;
  double m = 0.2;
  double q = 0.0;
  double M = 1e3;
  double kappa = 8.0 * std::numbers::pi;
  double epsilon = 1e-3;
  int fd_order = 2;
  double k0 = 0.25;
  double sigma = 8.0;
  double omega_eps = 0.0;  // conformal amplitude
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline Config parse_config(std::istream& in) {
  static const std::set<std::string> sections = {"scenario", "grid", "params", "outputs"};
  static const std::set<std::string> scenarios = {"vacuum",          "flat_dirac_packet",
                                                  "weakfield_packet", "boost_degeneracy",
                                                  "higgs_relax",      "einstein_residual"};
  Config cfg;
  std::string line;
  int lineno = 0;
  bool scenario_set = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      const std::string name = detail::trim(line.substr(1, line.size() - 2));
      if (!sections.count(name))
        throw ConfigError("line " + std::to_string(lineno) + ": unknown section '" + name + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");

    auto as_int = [&](int& slot) {
      std::size_t pos = 0;
      int v = 0;
      try {
        v = std::stoi(value, &pos);
      } catch (...) {
        throw ConfigError("line " + std::to_string(lineno) + ": bad integer '" + value + "'");
      }
      if (pos != value.size())
        throw ConfigError("line " + std::to_string(lineno) + ": bad integer '" + value + "'");
      slot = v;
    };
    auto as_double = [&](double& slot) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &pos);
      } catch (...) {
        throw ConfigError("line " + std::to_string(lineno) + ": bad number '" + value + "'");
      }
      if (pos != value.size())
        throw ConfigError("line " + std::to_string(lineno) + ": bad number '" + value + "'");
      slot = v;
    };

    if (key == "scenario") {
      if (!scenarios.count(value))
        throw ConfigError("line " + std::to_string(lineno) + ": unknown scenario '" + value + "'");
      cfg.scenario = value;
      scenario_set = true;
    } else if (key == "nx")
      as_int(cfg.nx);
    else if (key == "dx")
      as_double(cfg.dx);
    else if (key == "dt")
      as_double(cfg.dt);
    else if (key == "steps")
      as_int(cfg.steps);
    else if (key == "m")
      as_double(cfg.m);
    else if (key == "q")
      as_double(cfg.q);
    else if (key == "M")
      as_double(cfg.M);
    else if (key == "kappa")
      as_double(cfg.kappa);
    else if (key == "epsilon")
      as_double(cfg.epsilon);
    else if (key == "fd_order") {
      as_int(cfg.fd_order);
      if (cfg.fd_order != 2 && cfg.fd_order != 4)
        throw ConfigError("line " + std::to_string(lineno) + ": fd_order must be 2 or 4");
    } else if (key == "k0")
      as_double(cfg.k0);
    else if (key == "sigma")
      as_double(cfg.sigma);
    else if (key == "omega_eps")
      as_double(cfg.omega_eps);
    else
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  if (!scenario_set) throw ConfigError("config is missing the required 'scenario' key");
  return cfg;
}

inline Config parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  return parse_config(f);
}

}  // namespace protograv
