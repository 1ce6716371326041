// Copyright 2026 The ionlaser Authors
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

#pragma once

// Key-value run configuration.
//
//   # comment
//   drive.rabi = 95          # MHz (divided by 2*pi)
//   sweep.grid = log 0.5 80 24
//
// Frequencies are MHz/2pi, the field B is in gauss, times are in us and the
// histogram bin width is in ns. Values are converted to internal units here
// and nowhere else. See configs/README.md for the full list of keys.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ionlaser/core.hpp"
#include "ionlaser/montecarlo.hpp"
#include "ionlaser/params.hpp"
#include "ionlaser/resonance.hpp"
#include "ionlaser/timetag.hpp"

namespace ionlaser {

struct SweepSpec {
  std::string parameter = "recycle.rabi";
  std::vector<double> values;  // config units
};

/// Log-spaced Omega2 grid used when a sweep names no values.
inline std::vector<double> default_sweep_grid() {
  std::vector<double> v;
  for (int i = 0; i < 24; ++i) v.push_back(0.5 * std::pow(80.0 / 0.5, i / 23.0));
  return v;
}

struct RunConfig {
  SystemParams system = calibrated_system();
  bool lock = false;
  LockOptions lock_options;
  std::optional<SweepSpec> sweep;

  double tau_max_us = 15.0;
  double tau_step_us = 0.05;
  double bin_width_ns = 500.0;

  DetectionParams detection;
  MonteCarloOptions mc;
  ClickFormat mc_format = ClickFormat::Csv;

  std::string clicks_path;
  ClickFormat clicks_format = ClickFormat::Csv;
  Normalization normalization = Normalization::RateProduct;
  std::optional<double> snr;  // unset: estimated from the streams
  std::optional<double> corr_duration_us;
  std::optional<double> corr_n_ss;

  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Parses a seed: a non-negative decimal integer that fits in 64 bits.
inline std::uint64_t parse_seed(const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    throw InvalidSeed("seed must be a non-negative integer, got '" + text + "'");
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw InvalidSeed("seed out of range: " + text);
  }
}

/// Sets one physical parameter from a value in config units. Returns false
/// for an unknown path.
inline bool set_parameter(SystemParams& p, const std::string& path, double v) {
  if (path == "drive.rabi") p.drive.rabi = mhz(v);
  else if (path == "drive.detuning") p.drive.detuning = mhz(v);
  else if (path == "drive.linewidth") p.drive.linewidth = mhz(v);
  else if (path == "recycle.rabi") p.recycle.rabi = mhz(v);
  else if (path == "recycle.detuning") p.recycle.detuning = mhz(v);
  else if (path == "recycle.linewidth") p.recycle.linewidth = mhz(v);
  else if (path == "cavity.g") p.cavity.coupling = mhz(v);
  else if (path == "cavity.kappa") p.cavity.decay = mhz(v);
  else if (path == "cavity.detuning") p.cavity.detuning = mhz(v);
  else if (path == "decay.gamma1") p.decay.gamma1 = mhz(v);
  else if (path == "decay.gamma2") p.decay.gamma2 = mhz(v);
  else if (path == "b_gauss") p.b_gauss = v;
  else return false;
  return true;
}

/// Current value of a physical parameter in config units.
inline double get_parameter(const SystemParams& p, const std::string& path) {
  if (path == "drive.rabi") return to_mhz(p.drive.rabi);
  if (path == "drive.detuning") return to_mhz(p.drive.detuning);
  if (path == "drive.linewidth") return to_mhz(p.drive.linewidth);
  if (path == "recycle.rabi") return to_mhz(p.recycle.rabi);
  if (path == "recycle.detuning") return to_mhz(p.recycle.detuning);
  if (path == "recycle.linewidth") return to_mhz(p.recycle.linewidth);
  if (path == "cavity.g") return to_mhz(p.cavity.coupling);
  if (path == "cavity.kappa") return to_mhz(p.cavity.decay);
  if (path == "cavity.detuning") return to_mhz(p.cavity.detuning);
  if (path == "decay.gamma1") return to_mhz(p.decay.gamma1);
  if (path == "decay.gamma2") return to_mhz(p.decay.gamma2);
  if (path == "b_gauss") return p.b_gauss;
  throw ConfigurationError("unknown parameter '" + path + "'");
}

namespace detail {

class ConfigReader {
 public:
  ConfigReader(std::string source, std::size_t line) : source_(std::move(source)), line_(line) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigurationError(source_ + ":" + std::to_string(line_) + ": " + msg);
  }

  double number(const std::string& text) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      fail("expected a number, got '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) fail("expected a finite number, got '" + text + "'");
    return v;
  }

  int integer(const std::string& text) const {
    const double v = number(text);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail("expected an integer, got '" + text + "'");
    return static_cast<int>(v);
  }

  bool boolean(const std::string& text) const {
    if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
    if (text == "false" || text == "no" || text == "0" || text == "off") return false;
    fail("expected true/false, got '" + text + "'");
  }

  std::vector<std::string> words(const std::string& text) const {
    std::string t = text;
    for (auto& c : t)
      if (c == ',') c = ' ';
    std::istringstream in(t);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  }

  std::vector<double> numbers(const std::string& text) const {
    std::vector<double> out;
    for (const auto& w : words(text)) out.push_back(number(w));
    return out;
  }

 private:
  std::string source_;
  std::size_t line_;
};

inline std::vector<double> parse_grid(const ConfigReader& r, const std::string& text) {
  const auto w = r.words(text);
  if (w.size() != 4 || (w[0] != "log" && w[0] != "linear")) r.fail("grid must be 'log|linear <first> <last> <count>'");
  const double a = r.number(w[1]), b = r.number(w[2]);
  const int n = r.integer(w[3]);
  if (n < 1) r.fail("grid needs at least one point");
  if (w[0] == "log" && !(a > 0.0 && b > 0.0)) r.fail("log grid bounds must be > 0");
  std::vector<double> v;
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    v.push_back(w[0] == "log" ? a * std::pow(b / a, f) : a + (b - a) * f);
  }
  return v;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  RunConfig cfg;
  bool cavity_detuning_set = false;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const detail::ConfigReader r(source, lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) r.fail("expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) r.fail("missing key");
    if (auto it = seen.find(key); it != seen.end())
      r.fail("duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
    seen[key] = lineno;

    auto& s = cfg.system;
    auto& d = cfg.detection;
    if (key == "cavity.fock_cutoff") {
      s.cavity.modes.fock_cutoff = r.integer(value);
    } else if (key.starts_with("sweep.")) {
      if (!cfg.sweep) cfg.sweep = SweepSpec{};
      if (key == "sweep.parameter") {
        try {
          (void)get_parameter(s, value);
        } catch (const ConfigurationError&) {
          r.fail("unknown sweep parameter '" + value + "'");
        }
        cfg.sweep->parameter = value;
      } else if (key == "sweep.values") {
        cfg.sweep->values = r.numbers(value);
        if (cfg.sweep->values.empty()) r.fail("sweep.values is empty");
      } else if (key == "sweep.grid") {
        cfg.sweep->values = detail::parse_grid(r, value);
      } else {
        r.fail("unknown key '" + key + "'");
      }
    } else if (key == "lock.enabled") {
      cfg.lock = r.boolean(value);
    } else if (key == "lock.line") {
      const auto v = r.numbers(value);
      if (v.size() != 2) r.fail("lock.line needs two values: 2m of the S1/2 and of the D3/2 sublevel");
      cfg.lock_options.line = {static_cast<int>(v[0]), static_cast<int>(v[1])};
    } else if (key == "lock.reference_rabi") {
      cfg.lock_options.reference_recycle_rabi = mhz(r.number(value));
    } else if (key == "g2.tau_max_us") {
      cfg.tau_max_us = r.number(value);
    } else if (key == "g2.tau_step_us") {
      cfg.tau_step_us = r.number(value);
    } else if (key == "corr.bin_width_ns") {
      cfg.bin_width_ns = r.number(value);
    } else if (key == "corr.tau_max_us") {
      cfg.tau_max_us = r.number(value);
    } else if (key == "corr.input") {
      cfg.clicks_path = value;
    } else if (key == "corr.format" || key == "mc.format") {
      if (value != "csv" && value != "binary") r.fail("format must be csv or binary");
      (key == "corr.format" ? cfg.clicks_format : cfg.mc_format) = value == "csv" ? ClickFormat::Csv : ClickFormat::Binary;
    } else if (key == "corr.normalization") {
      if (value == "rate_product") cfg.normalization = Normalization::RateProduct;
      else if (value == "tail_mean") cfg.normalization = Normalization::TailMean;
      else r.fail("normalization must be rate_product or tail_mean");
    } else if (key == "corr.snr") {
      if (value == "auto") cfg.snr.reset();
      else if (value == "inf") cfg.snr = std::numeric_limits<double>::infinity();
      else cfg.snr = r.number(value);
    } else if (key == "corr.duration_us") {
      cfg.corr_duration_us = r.number(value);
    } else if (key == "corr.n_ss") {
      cfg.corr_n_ss = r.number(value);
    } else if (key == "mc.duration_us") {
      cfg.mc.duration_us = r.number(value);
    } else if (key == "mc.trajectories") {
      cfg.mc.n_traj = r.integer(value);
    } else if (key == "mc.burn_in_us") {
      cfg.mc.burn_in_us = r.number(value);
    } else if (key == "mc.sample_interval_us") {
      cfg.mc.sample_interval_us = r.number(value);
    } else if (key == "detection.efficiency") {
      d.cavity_path_efficiency = r.number(value);
    } else if (key == "detection.splitter_ratio") {
      d.splitter_ratio = r.number(value);
    } else if (key == "detection.dark_rate") {
      d.dark_rate = r.number(value);
    } else if (key == "detection.stray_rate") {
      d.stray_rate = r.number(value);
    } else if (key == "detection.eta_397") {
      d.eta_397 = r.number(value);
    } else if (key == "detection.jitter_ps") {
      d.timing_jitter_ps = r.number(value);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "seed") {
      try {
        cfg.seed = parse_seed(value);
      } catch (const InvalidSeed& e) {
        throw InvalidSeed(source + ":" + std::to_string(lineno) + ": " + e.what());
      }
    } else if (key == "threads") {
      cfg.threads = r.integer(value);
      if (cfg.threads < 1) r.fail("threads must be >= 1");
    } else if (set_parameter(s, key, r.number(value))) {
      if (key == "cavity.detuning") cavity_detuning_set = true;
    } else {
      r.fail("unknown key '" + key + "'");
    }
  }

  if (!cavity_detuning_set) cfg.system.cavity.detuning = cfg.system.drive.detuning;
  if (cfg.sweep && cfg.sweep->values.empty()) {
    if (seen.count("sweep.values") || seen.count("sweep.grid"))
      throw ConfigurationError(source + ": sweep list is empty");
    cfg.sweep->values = default_sweep_grid();
  }
  try {
    cfg.system.validate();
    cfg.detection.validate();
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(source + ": " + e.what());
  }
  if (!(cfg.tau_max_us >= 0.0) || !(cfg.tau_step_us > 0.0) || !(cfg.bin_width_ns > 0.0))
    throw ConfigurationError(source + ": tau range and bin width must be positive");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file " + path);
  return parse_config(in, path);
}

}  // namespace ionlaser
