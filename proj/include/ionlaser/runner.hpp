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

// Task runner behind the command-line tool: single points, parameter sweeps,
// model g2(tau), Monte Carlo click generation and click-file analysis.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ionlaser/config.hpp"
#include "ionlaser/effective.hpp"
#include "ionlaser/master.hpp"
#include "ionlaser/montecarlo.hpp"
#include "ionlaser/observables.hpp"
#include "ionlaser/resonance.hpp"
#include "ionlaser/timetag.hpp"

namespace ionlaser {

enum class Task { Steady, Sweep, G2, MonteCarlo, Correlate };

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitSolver = 2;

struct PointResult {
  double x = 0.0;  // swept value, config units
  bool ok = false;
  std::string error;
  double n_ss = 0.0, n_p = 0.0, q = 0.0, r = 0.0, g2_0 = 0.0, p1 = 0.0, p2 = 0.0;
  std::string regime;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string regime_of(const SystemParams& p) {
  try {
    return regime_name(regime_classifier(effective_params(p), p.cavity.decay));
  } catch (const ZeroDetuning&) {
    return "n/a";
  }
}

inline PointResult solve_point(const SystemParams& p, double x) {
  PointResult out;
  out.x = x;
  try {
    const SteadyStateResult r = solve_steady_state(p);
    out.n_ss = r.n_ss;
    out.n_p = r.n_p;
    out.q = r.q;
    out.r = r.r;
    out.g2_0 = r.g2_0;
    out.p1 = r.p1();
    out.p2 = r.p2();
    out.regime = regime_of(p);
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
    out.regime = "failed";
  }
  return out;
}

inline std::string sweep_column_name(const std::string& parameter) {
  if (parameter == "recycle.rabi") return "omega2_MHz";
  return parameter == "b_gauss" ? "b_gauss" : parameter + "_MHz";
}

inline std::string sweep_header(const std::string& parameter) {
  return sweep_column_name(parameter) + ",n_ss,nP,Q,R,g2_0,p1,p2,regime";
}

inline std::string sweep_row(const PointResult& r) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream out;
  out << format_number(r.x);
  for (double v : {r.n_ss, r.n_p, r.q, r.r, r.g2_0, r.p1, r.p2}) out << ',' << format_number(r.ok ? v : nan);
  out << ',' << r.regime;
  return out.str();
}

/// Applies the Raman lock when the configuration asks for it.
inline SystemParams prepare_system(const RunConfig& cfg, std::ostream* log = nullptr) {
  if (!cfg.lock) return cfg.system;
  const LockResult lr = raman_lock(cfg.system, cfg.lock_options);
  if (log)
    *log << "raman lock: drive detuning " << format_number(to_mhz(cfg.system.drive.detuning)) << " -> "
         << format_number(to_mhz(lr.params.drive.detuning)) << " MHz\n";
  return lr.params;
}

/// Solves every point of `sweep` on `threads` workers. `on_row` is called in
/// sweep order from a single writer as soon as the preceding rows are done.
template <typename RowSink>
std::vector<PointResult> run_sweep(const SystemParams& base, const SweepSpec& sweep, int threads, RowSink&& on_row) {
  if (sweep.values.empty()) throw ConfigurationError("sweep list is empty");
  const std::size_t n = sweep.values.size();
  std::vector<SystemParams> points(n, base);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(sweep.values[i])) throw ConfigurationError("sweep values must be finite");
    if (!set_parameter(points[i], sweep.parameter, sweep.values[i]))
      throw ConfigurationError("unknown sweep parameter '" + sweep.parameter + "'");
    points[i].validate();
  }

  std::vector<PointResult> results(n);
  std::vector<char> done(n, 0);
  std::size_t written = 0;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      PointResult r = solve_point(points[i], sweep.values[i]);
      std::lock_guard<std::mutex> lock(mu);
      results[i] = std::move(r);
      done[i] = 1;
      while (written < n && done[written]) on_row(results[written++]);
    }
  };
  const int nthreads = std::clamp<int>(threads, 1, static_cast<int>(n));
  std::vector<std::thread> pool;
  for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

struct SweepReport {
  std::optional<std::size_t> argmax_n, argmax_q;
  bool interior_max_n = false;  // n_ss falls again after its maximum
  std::size_t failed = 0;
  std::string text;
};

/// Summary of a sweep: regime per point and the location of the n_ss and Q
/// maxima. An interior n_ss maximum is the self-quenching signature; a Q
/// maximum before it marks the threshold region.
inline SweepReport report_sweep(const std::vector<PointResult>& rows, const std::string& column = "omega2_MHz") {
  SweepReport rep;
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << column << "=" << format_number(r.x) << "  ";
    if (!r.ok) {
      ++rep.failed;
      out << "FAILED: " << r.error << "\n";
      continue;
    }
    out << "n_ss=" << format_number(r.n_ss) << " Q=" << format_number(r.q) << " regime=" << r.regime << "\n";
    if (!rep.argmax_n || r.n_ss > rows[*rep.argmax_n].n_ss) rep.argmax_n = i;
    if (!std::isnan(r.q) && (!rep.argmax_q || r.q > rows[*rep.argmax_q].q)) rep.argmax_q = i;
  }
  if (rep.argmax_n) {
    const std::size_t k = *rep.argmax_n;
    bool before = false, after = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].ok) continue;
      if (i < k) before = true;
      if (i > k && rows[i].n_ss < rows[k].n_ss) after = true;
    }
    rep.interior_max_n = before && after;
    out << "argmax n_ss: " << column << "=" << format_number(rows[k].x) << " (n_ss=" << format_number(rows[k].n_ss)
        << ")\n";
    if (rep.argmax_q)
      out << "argmax Q:    " << column << "=" << format_number(rows[*rep.argmax_q].x)
          << " (Q=" << format_number(rows[*rep.argmax_q].q) << ")\n";
    if (rep.interior_max_n) {
      out << "n_ss has an interior maximum: self-quenching at large " << column << "\n";
      if (rep.argmax_q && rows[*rep.argmax_q].x < rows[k].x)
        out << "Q peaks before n_ss: threshold candidate near " << column << "="
            << format_number(rows[*rep.argmax_q].x) << "\n";
    } else {
      out << "no self-quenching detected\n";
    }
  }
  if (rep.failed) out << rep.failed << " point(s) failed\n";
  rep.text = out.str();
  return rep;
}

/// Reads a sweep CSV written by the runner.
inline std::vector<PointResult> read_sweep_csv(const std::string& path, std::string* column = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty file");
  if (column) *column = line.substr(0, line.find(','));
  std::vector<PointResult> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw Error(path + ":" + std::to_string(lineno) + ": expected 9 columns");
    PointResult r;
    try {
      r.x = std::stod(f[0]);
      double* dst[] = {&r.n_ss, &r.n_p, &r.q, &r.r, &r.g2_0, &r.p1, &r.p2};
      for (std::size_t k = 0; k < 7; ++k) *dst[k] = std::stod(f[k + 1]);
    } catch (const std::exception&) {
      throw Error(path + ":" + std::to_string(lineno) + ": bad number");
    }
    r.regime = f[8];
    r.ok = r.regime != "failed";
    if (!r.ok) r.error = "failed in run";
    rows.push_back(r);
  }
  return rows;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

inline std::string effective_summary(const SystemParams& p) {
  try {
    const EffectiveParams e = effective_params(p);
    std::ostringstream out;
    out << "g_eff=" << format_number(to_mhz(e.g_eff) * 1e3) << "kHz gamma_eff=" << format_number(to_mhz(e.gamma_eff) * 1e3)
        << "kHz Gamma_tot=" << format_number(to_mhz(e.gamma_tot) * 1e3) << "kHz";
    return out.str();
  } catch (const ZeroDetuning&) {
    return "effective rates n/a (zero drive detuning)";
  }
}

}  // namespace detail

/// Runs one task. Writes result files below cfg.output_dir and a summary to
/// `out`. Returns kExitOk, or kExitSolver when any solve failed.
inline int run_task(Task task, const RunConfig& cfg, std::ostream& out) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  switch (task) {
    case Task::Steady: {
      const SystemParams p = prepare_system(cfg, &out);
      const PointResult r = solve_point(p, to_mhz(p.recycle.rabi));
      auto f = detail::open_output(dir / "steady.csv");
      f << sweep_header("recycle.rabi") << '\n' << sweep_row(r) << '\n';
      if (!r.ok) {
        out << "solver failed at omega2_MHz=" << format_number(r.x) << ": " << r.error << "\n";
        return kExitSolver;
      }
      out << "n_ss=" << format_number(r.n_ss) << " nP=" << format_number(r.n_p) << " g2_0=" << format_number(r.g2_0)
          << " Q=" << format_number(r.q) << " R=" << format_number(r.r) << " p1=" << format_number(r.p1)
          << " p2=" << format_number(r.p2) << " rate=" << format_number(count_rate(r.n_ss)) << "kHz regime=" << r.regime
          << " " << detail::effective_summary(p) << "\n";
      out << "wrote " << (dir / "steady.csv").string() << "\n";
      return kExitOk;
    }
    case Task::Sweep: {
      const SweepSpec sweep = cfg.sweep.value_or(SweepSpec{"recycle.rabi", default_sweep_grid()});
      const SystemParams base = prepare_system(cfg, &out);
      const std::string column = sweep_column_name(sweep.parameter);
      auto csv = detail::open_output(dir / "sweep.csv");
      auto dat = detail::open_output(dir / "sweep.dat");
      csv << sweep_header(sweep.parameter) << '\n';
      dat << "# " << column << " n_ss nP Q R g2_0 p1 p2 regime\n";
      const auto rows = run_sweep(base, sweep, cfg.threads, [&](const PointResult& r) {
        const std::string row = sweep_row(r);
        csv << row << '\n' << std::flush;
        std::string spaced = row;
        std::replace(spaced.begin(), spaced.end(), ',', ' ');
        dat << spaced << '\n';
      });
      const SweepReport rep = report_sweep(rows, column);
      auto txt = detail::open_output(dir / "report.txt");
      txt << rep.text;
      out << rep.text;
      out << "wrote " << (dir / "sweep.csv").string() << ", " << (dir / "sweep.dat").string() << " (gnuplot), "
          << (dir / "report.txt").string() << "\n";
      return rep.failed ? kExitSolver : kExitOk;
    }
    case Task::G2: {
      const SystemParams p = prepare_system(cfg, &out);
      const Model m = build_model(p);
      std::vector<double> grid;
      const auto steps = static_cast<long>(std::floor(cfg.tau_max_us / cfg.tau_step_us + 1e-9));
      for (long k = -steps; k <= steps; ++k) grid.push_back(static_cast<double>(k) * cfg.tau_step_us);
      CorrelationSeries s;
      try {
        const DensityMatrix rho = steady_state(m.liouvillian);
        s = g2_regression(m.space, rho, m.liouvillian, grid);
      } catch (const ConfigurationError&) {
        throw;
      } catch (const Error& e) {
        out << "solver failed: " << e.what() << "\n";
        return kExitSolver;
      }
      save_series_csv((dir / "g2.csv").string(), s);
      out << "g2(0)=" << format_number(zero_lag_value(s)) << " over |tau|<=" << format_number(cfg.tau_max_us) << "us\n";
      out << "wrote " << (dir / "g2.csv").string() << "\n";
      return kExitOk;
    }
    case Task::MonteCarlo: {
      const SystemParams p = prepare_system(cfg, &out);
      MonteCarloOptions opt = cfg.mc;
      opt.seed = cfg.seed;
      opt.threads = cfg.threads;
      MonteCarloResult r;
      try {
        r = run_trajectories(p, cfg.detection, opt);
      } catch (const ConfigurationError&) {
        throw;
      } catch (const Error& e) {
        out << "solver failed: " << e.what() << "\n";
        return kExitSolver;
      }
      const bool bin = cfg.mc_format == ClickFormat::Binary;
      const fs::path clicks = dir / (bin ? "clicks.bin" : "clicks.csv");
      save_clicks(clicks.string(), r.streams, cfg.mc_format);
      std::ostringstream sum;
      sum << "duration_us=" << format_number(r.total_duration_us) << "\n"
          << "mean_n=" << format_number(r.mean_n) << " se=" << format_number(r.se_n) << "\n"
          << "mean_nP=" << format_number(r.mean_np) << " se=" << format_number(r.se_np) << "\n"
          << "jumps=" << r.jumps << " cavity_emissions=" << r.cavity_emissions << "\n"
          << "clicks0=" << r.streams[0].size() << " clicks1=" << r.streams[1].size() << "\n"
          << "signal_clicks=" << r.signal_clicks[0] + r.signal_clicks[1]
          << " noise_clicks=" << r.noise_clicks[0] + r.noise_clicks[1] << "\n"
          << "snr_true=" << format_number(r.true_snr())
          << " snr_estimated=" << format_number(estimate_snr(r.streams, r.total_duration_us, cfg.detection)) << "\n"
          << "fluorescence_counts=" << r.fluorescence_counts << "\n";
      auto f = detail::open_output(dir / "mc_summary.txt");
      f << sum.str();
      out << sum.str() << "wrote " << clicks.string() << ", " << (dir / "mc_summary.txt").string() << "\n";
      return kExitOk;
    }
    case Task::Correlate: {
      if (cfg.clicks_path.empty()) throw ConfigurationError("corr.input is not set");
      const ClickStreams s = load_clicks(cfg.clicks_path, cfg.clicks_format);
      CrossCorrelationOptions co;
      co.bin_width_ns = cfg.bin_width_ns;
      co.tau_max_us = cfg.tau_max_us;
      co.normalization = cfg.normalization;
      co.duration_us = cfg.corr_duration_us;
      const CorrelationSeries raw = cross_correlate(s[0], s[1], co);
      double snr = 0.0;
      if (cfg.snr) {
        snr = *cfg.snr;
      } else {
        double duration = 0.0;
        if (cfg.corr_duration_us) {
          duration = *cfg.corr_duration_us;
        } else {
          const auto all = merged(s);
          duration = static_cast<double>(all.back().t_ps - all.front().t_ps) * 1e-6;
        }
        snr = estimate_snr(s, duration, cfg.detection);
      }
      const CorrelationSeries g = subtract_accidentals(raw, snr);
      save_series_csv((dir / "g2_raw.csv").string(), raw);
      save_series_csv((dir / "g2_corrected.csv").string(), g);
      out << "events=" << s[0].size() << "," << s[1].size() << " snr=" << format_number(snr)
          << " g2_raw(0)=" << format_number(zero_lag_value(raw)) << " g2(0)=" << format_number(zero_lag_value(g))
          << " clamped_bins=" << g.clamped_bins;
      if (cfg.corr_n_ss) out << " Q=" << format_number(q_from_series(g, *cfg.corr_n_ss));
      out << "\nwrote " << (dir / "g2_raw.csv").string() << ", " << (dir / "g2_corrected.csv").string() << "\n";
      return kExitOk;
    }
  }
  return kExitUsage;
}

}  // namespace ionlaser
