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


#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ionlaser/config.hpp"
#include "ionlaser/runner.hpp"

int main(int argc, char** argv) {
  using namespace ionlaser;
  CLI::App app{"Single-ion cavity laser: steady states, sweeps, g2, quantum-jump clicks and click analysis"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seed_text;
  int threads = 0;
  std::string report_input;

  struct Entry {
    const char* name;
    const char* help;
    Task task;
  };
  const Entry entries[] = {
      {"steady", "solve one parameter point", Task::Steady},
      {"sweep", "solve a parameter sweep (default: Omega2, log grid)", Task::Sweep},
      {"g2", "model g2(tau) from the quantum regression theorem", Task::G2},
      {"mc", "simulate detector clicks with quantum-jump trajectories", Task::MonteCarlo},
      {"corr", "correlate a two-channel click file", Task::Correlate},
  };
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed_text, "random seed (overrides seed)");
    sub->add_option("--threads", threads, "worker threads (overrides threads)")->check(CLI::PositiveNumber);
  }
  auto* report = app.add_subcommand("report", "summarize an existing sweep CSV");
  report->add_option("input", report_input, "sweep.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::string column;
      const auto rows = read_sweep_csv(report_input, &column);
      std::cout << report_sweep(rows, column).text;
      return kExitOk;
    }
    RunConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!seed_text.empty()) cfg.seed = parse_seed(seed_text);
    if (threads > 0) cfg.threads = threads;
    for (const auto& e : entries)
      if (app.got_subcommand(e.name)) return run_task(e.task, cfg, std::cout);
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidSeed& e) {
    std::cerr << "invalid seed: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ClickFormatError& e) {
    std::cerr << "click file error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CorrelationError& e) {
    std::cerr << "correlation error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
