// Copyright 2026 The gmix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Run configuration in flat `key = value` text. '#' starts a comment;
// blank lines are ignored; unknown or repeated keys are errors.
//
//   alpha_x alpha_a sigma0_sq_x sigma0_sq_a sigma1_sq_x sigma1_sq_a T
//   epsilon lambda loss_mode c lr momentum optimizer cosine lr_floor
//   epochs batch hidden layers

#pragma once

#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gmix/model.hpp"

namespace gmix {

struct RunConfig {
  double alpha_x = -0.5, alpha_a = -0.5;
  double sigma0_sq_x = 1.0, sigma0_sq_a = 1.0;
  double sigma1_sq_x = 0.04, sigma1_sq_a = 0.04;
  double T = 1.0;
  TrainConfig train;
  int hidden = 64;
  int layers = 3;

  /// Throws std::invalid_argument for an invalid schedule.
  GraphBridgeParams bridge() const {
    return {{alpha_x, NoiseSchedule(sigma0_sq_x, sigma1_sq_x, T)},
            {alpha_a, NoiseSchedule(sigma0_sq_a, sigma1_sq_a, T)}};
  }

  void validate() const {
    bridge();
    train.validate();
    if (hidden < 1 || layers < 0) throw std::invalid_argument("config: bad hidden or layers");
    if (!(train.epsilon < T)) throw std::invalid_argument("config: epsilon must be below T");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: '" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace detail

/// Applies one key/value pair.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_int;
  const std::map<std::string, double*> reals{
      {"alpha_x", &cfg.alpha_x},         {"alpha_a", &cfg.alpha_a},
      {"sigma0_sq_x", &cfg.sigma0_sq_x}, {"sigma0_sq_a", &cfg.sigma0_sq_a},
      {"sigma1_sq_x", &cfg.sigma1_sq_x}, {"sigma1_sq_a", &cfg.sigma1_sq_a},
      {"T", &cfg.T},                     {"epsilon", &cfg.train.epsilon},
      {"lambda", &cfg.train.lambda},     {"c", &cfg.train.c},
      {"lr", &cfg.train.lr},             {"momentum", &cfg.train.momentum},
      {"lr_floor", &cfg.train.lr_floor}};
  const std::map<std::string, int*> ints{{"epochs", &cfg.train.epochs},
                                         {"batch", &cfg.train.batch},
                                         {"hidden", &cfg.hidden},
                                         {"layers", &cfg.layers}};
  if (auto it = reals.find(key); it != reals.end()) {
    *it->second = parse_double(key, value);
  } else if (auto jt = ints.find(key); jt != ints.end()) {
    *jt->second = parse_int(key, value);
  } else if (key == "loss_mode") {
    cfg.train.loss_mode = parse_loss_mode(value);
  } else if (key == "optimizer") {
    cfg.train.optimizer = parse_optimizer(value);
  } else if (key == "cosine") {
    cfg.train.cosine = detail::parse_bool(key, value);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

/// Splits "key=value"; used for command-line overrides.
inline std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("config: expected key = value in '" + s + "'");
  return {detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1))};
}

inline RunConfig parse_config(const std::string& text, RunConfig cfg = {}) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      const auto [key, value] = split_assignment(line);
      if (!seen.insert(key).second) throw std::invalid_argument("config: repeated key '" + key + "'");
      set_config_value(cfg, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

/// Shortest round-trip rendering; parse_config(to_text(c)) == c.
inline std::string to_text(const RunConfig& c) {
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::ostringstream out;
  out << "alpha_x = " << num(c.alpha_x) << "\nalpha_a = " << num(c.alpha_a)
      << "\nsigma0_sq_x = " << num(c.sigma0_sq_x) << "\nsigma0_sq_a = " << num(c.sigma0_sq_a)
      << "\nsigma1_sq_x = " << num(c.sigma1_sq_x) << "\nsigma1_sq_a = " << num(c.sigma1_sq_a)
      << "\nT = " << num(c.T) << "\nepsilon = " << num(c.train.epsilon)
      << "\nlambda = " << num(c.train.lambda) << "\nloss_mode = " << to_string(c.train.loss_mode)
      << "\nc = " << num(c.train.c) << "\nlr = " << num(c.train.lr)
      << "\nmomentum = " << num(c.train.momentum)
      << "\noptimizer = " << to_string(c.train.optimizer)
      << "\ncosine = " << (c.train.cosine ? "true" : "false")
      << "\nlr_floor = " << num(c.train.lr_floor) << "\nepochs = " << c.train.epochs
      << "\nbatch = " << c.train.batch << "\nhidden = " << c.hidden << "\nlayers = " << c.layers
      << "\n";
  return out.str();
}

}  // namespace gmix
