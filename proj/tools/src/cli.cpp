/*
 * Copyright 2026 The FINER Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "finer/tools/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "finer/json_io.hpp"
#include "finer/tools/config.hpp"
#include "finer/tools/io.hpp"
#include "finer/tools/pipeline.hpp"

namespace finer::tools {

void configure_logging() {
  static bool done = false;
  if (!done) {
    spdlog::set_default_logger(spdlog::stderr_logger_mt("finer"));
    spdlog::set_pattern("[%l] %v");
    done = true;
  }
  const char* env = std::getenv("FINER_LOG");
  const std::string level = env != nullptr ? env : "warn";
  spdlog::set_level(spdlog::level::from_str(level));
}

namespace {

void error_line(std::ostream& err, int code, std::string_view kind, std::string_view message) {
  const nlohmann::json j = {{"error", kind}, {"exit_code", code}, {"message", message}};
  err << "finer-error " << j.dump() << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explanation-guided fine-tuning and ensembling for risk detectors", "finer"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> scenario;
  std::optional<std::size_t> k;
  std::optional<std::size_t> jobs;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config (defaults when omitted)");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--scenario", scenario, "Restrict to one scenario: black-box, low-cost or unlimited");
    sub->add_option("--k", k, "Number of ICs in an explanation");
    sub->add_option("--jobs", jobs, "Worker threads for per-sample work");
  };
  const char* commands[][2] = {
      {"gen-data", "Generate the synthetic dataset"},
      {"train", "Train the baseline model"},
      {"finetune", "Explanation-guided fine-tuning of the baseline model"},
      {"explain", "Write per-sample explanation records"},
      {"eval", "Compute tables and curves from explanation records"},
      {"ablate", "Paired with/without comparisons"},
      {"report", "Summarize outputs as a markdown document"},
      {"pipeline", "Run every stage in order"},
      {"config", "Print the effective config"},
  };
  for (const auto& c : commands) add_common(app.add_subcommand(c[0], c[1]));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    error_line(err, kExitConfig, "config", e.what());
    return kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  configure_logging();
  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      if (!std::filesystem::exists(config_path)) throw ConfigError("config file not found: " + config_path);
      cfg = parse_config(read_file(config_path));
    }
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;
    if (scenario) cfg.scenarios = {*scenario};
    if (k) cfg.metrics.k = *k;
    if (jobs) cfg.jobs = *jobs;
    cfg.validate();
    if (command == "config") {
      out << dump_config(cfg);
      return kExitOk;
    }
    Pipeline p(cfg);
    DirectoryLock lock(p.out());
    if (command == "gen-data") p.gen_data();
    else if (command == "train") p.train();
    else if (command == "finetune") p.finetune();
    else if (command == "explain") p.explain();
    else if (command == "eval") p.eval();
    else if (command == "ablate") p.ablate();
    else if (command == "report") p.report();
    else if (command == "pipeline") p.run_all();
    return kExitOk;
  } catch (const ConfigError& e) {
    error_line(err, kExitConfig, "config", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    error_line(err, kExitData, "data", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    error_line(err, kExitRuntime, "runtime", e.what());
    return kExitRuntime;
  }
}

}  // namespace finer::tools
