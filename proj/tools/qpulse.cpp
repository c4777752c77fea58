// Copyright 2026 The qpulse Authors
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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpulse/cli.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool force = false;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "Experiment config JSON");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "Override every seed in the config");
  cmd->add_option("--out", flags.out_dir, "Override the config's output directory");
  cmd->add_flag("--force", flags.force, "Overwrite existing output files");
  cmd->add_option("--workers", flags.workers, "Worker threads for evaluation");
}

qpulse::config::ExperimentConfig load_config(const CommonFlags& flags) {
  auto cfg = qpulse::config::load(flags.config_path);
  if (const char* env = std::getenv("QPULSE_SEED"))
    qpulse::config::override_all_seeds(cfg, std::stoull(env));
  if (flags.seed) qpulse::config::override_all_seeds(cfg, *flags.seed);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.workers) cfg.workers = *flags.workers;
  qpulse::config::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulse-sequence designers for single-qubit state preparation under "
               "non-Markovian noise"};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  auto* gen = app.add_subcommand("gen-tasks", "Write the task set and environment grid");
  add_common(gen, gen_flags);

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "Train the configured designer");
  add_common(train, train_flags);

  CommonFlags eval_flags;
  std::string eval_checkpoint;
  std::string eval_split = "test";
  std::string eval_tag;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a task split");
  add_common(eval, eval_flags);
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint JSON to evaluate")->required();
  eval->add_option("--split", eval_split, "Task split: train, validation, or test");
  eval->add_option("--tag", eval_tag, "Suffix for the result file names");

  CommonFlags sweep_flags;
  std::vector<std::string> sweep_checkpoints;
  std::string sweep_axis;
  auto* sweep = app.add_subcommand("sweep", "Scan checkpoints along an environment axis");
  add_common(sweep, sweep_flags);
  sweep->add_option("--checkpoint", sweep_checkpoints, "Checkpoint JSON (repeatable)")->required();
  sweep->add_option("--axis", sweep_axis, "Gamma, gamma, or T")->required();

  std::vector<std::string> report_inputs;
  std::string report_out;
  bool report_force = false;
  auto* report = app.add_subcommand("report", "Merge result files for plotting");
  report->add_option("--inputs", report_inputs, "Result files (all CSV or all JSON)")->required();
  report->add_option("--out", report_out, "Merged output file")->required();
  report->add_flag("--force", report_force, "Overwrite an existing output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return qpulse::cli::cmd_gen_tasks(load_config(gen_flags), gen_flags.force);
    if (train->parsed()) return qpulse::cli::cmd_train(load_config(train_flags), train_flags.force);
    if (eval->parsed())
      return qpulse::cli::cmd_eval(load_config(eval_flags), eval_checkpoint, eval_split, eval_tag,
                                   eval_flags.force);
    if (sweep->parsed())
      return qpulse::cli::cmd_sweep(load_config(sweep_flags), sweep_checkpoints, sweep_axis,
                                    sweep_flags.force);
    if (report->parsed()) return qpulse::cli::cmd_report(report_inputs, report_out, report_force);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
