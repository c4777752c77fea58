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

// Command implementations behind the qpulse binary. They live in the library
// so tests can drive them directly; the executable only parses flags.

#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "qpulse/agent_drl.hpp"
#include "qpulse/agent_sl.hpp"
#include "qpulse/config.hpp"
#include "qpulse/rollout.hpp"

namespace qpulse::cli {

namespace fs = std::filesystem;

inline void require_absent_or_force(const fs::path& path, bool force) {
  if (!force && fs::exists(path))
    throw std::runtime_error(path.string() + " exists; pass --force to overwrite");
}

/// Emit the task alphabet/split file and the default environment grid.
inline int cmd_gen_tasks(const config::ExperimentConfig& cfg, bool force,
                         std::ostream& log = std::cout) {
  const fs::path out_dir = cfg.out_dir;
  const fs::path tasks_path = out_dir / "tasks.json";
  const fs::path grid_path = out_dir / "grid.json";
  require_absent_or_force(tasks_path, force);
  require_absent_or_force(grid_path, force);

  const auto tasks = tasks::build_tasks_file(cfg.seeds.tasks);
  write_text_file(tasks_path, tasks::tasks_file_to_json(tasks).dump(1) + "\n");
  const auto grid = tasks::make_grid(tasks::default_axes(), tasks::default_held_out());
  write_text_file(grid_path, tasks::grid_to_json(grid).dump(1) + "\n");

  log << "wrote " << tasks_path.string() << " (" << tasks.tasks.size() << " tasks, split "
      << tasks.split.train.size() << "/" << tasks.split.validation.size() << "/"
      << tasks.split.test.size() << ")\n";
  log << "wrote " << grid_path.string() << " (" << grid.training.size() << " training + "
      << grid.held_out.size() << " held-out baths)\n";
  return 0;
}

namespace detail {

inline tasks::TasksFile load_tasks(const config::ExperimentConfig& cfg) {
  return tasks::tasks_file_from_json(nlohmann::json::parse(read_text_file(cfg.tasks_file)));
}

inline tasks::EnvironmentGrid load_grid(const config::ExperimentConfig& cfg) {
  if (cfg.grid_file.empty())
    throw std::invalid_argument("Case 3 needs paths.grid_file in the config");
  return tasks::grid_from_json(nlohmann::json::parse(read_text_file(cfg.grid_file)));
}

/// Cases 1 and 2 pin one training bath; Case 1 is the same environment with
/// the coupling turned off.
inline dynamics::BathParams training_bath(const config::ExperimentConfig& cfg) {
  dynamics::BathParams b = cfg.bath;
  if (cfg.case_id == 1) b.coupling = 0.0;
  return b;
}

inline std::string algorithm_of(const nn::Checkpoint& ckpt) {
  return ckpt.mlp.head == nn::Head::kQ ? "drl" : "sl";
}

inline void stamp_common_metadata(nn::Checkpoint& ckpt, const config::ExperimentConfig& cfg,
                                  const tasks::TasksFile& tasks_file) {
  ckpt.metadata["config_hash"] = config::config_hash(cfg);
  ckpt.metadata["seed_tasks"] = tasks_file.split.shuffle_seed;
  ckpt.metadata["algorithm"] = cfg.algorithm;
  if (cfg.case_id != 3) ckpt.metadata["bath"] = tasks::bath_to_json(training_bath(cfg));
}

}  // namespace detail

/// Train the configured designer and write checkpoint + learning curve (and,
/// for the supervised pipeline, the generated dataset) into the out dir.
inline int cmd_train(const config::ExperimentConfig& cfg, bool force,
                     std::ostream& log = std::cout) {
  const fs::path out_dir = cfg.out_dir;
  const fs::path ckpt_path = out_dir / "checkpoint.json";
  const fs::path curve_path = out_dir / "curve.csv";
  require_absent_or_force(ckpt_path, force);
  require_absent_or_force(curve_path, force);

  const auto tasks_file = detail::load_tasks(cfg);
  const auto train_tasks = tasks::select_tasks(tasks_file.tasks, tasks_file.split.train);
  const auto val_tasks = tasks::select_tasks(tasks_file.tasks, tasks_file.split.validation);

  tasks::EnvironmentGrid grid;
  if (cfg.case_id == 3) grid = detail::load_grid(cfg);

  if (cfg.algorithm == "drl") {
    const drl::DqnHyper hyper = config::resolve_drl_hyper(cfg);
    drl::TrainInputs inputs;
    inputs.train_tasks = train_tasks;
    inputs.validation_tasks = val_tasks;
    inputs.fixed_bath = detail::training_bath(cfg);
    inputs.validation_bath = cfg.case_id == 3 ? cfg.bath : inputs.fixed_bath;
    if (cfg.case_id == 3) inputs.bath_pool = grid.training;

    auto result = drl::train(hyper, inputs, cfg.seeds.init, cfg.seeds.train,
                             [&log](const drl::CurveRow& row) {
                               log << "epoch " << row.epoch << "  val F " << row.mean_validation_fidelity
                                   << "  eps " << row.epsilon << "\n";
                             });
    detail::stamp_common_metadata(result.best, cfg, tasks_file);
    if (cfg.case_id == 3)
      result.best.metadata["bath_grid_hash"] = hex64(tasks::grid_hash(grid));
    nn::save_checkpoint(ckpt_path, result.best);
    std::string csv = drl::curve_csv_header();
    drl::append_curve_rows(csv, result.curve);
    write_text_file(curve_path, csv);
    log << "best validation F " << result.best_validation_fidelity << " at epoch "
        << result.best_epoch << "\n";
  } else {
    const sl::SlHyper hyper = config::resolve_sl_hyper(cfg);
    const sl::LabelOptions label_opts = config::resolve_label_options(cfg);
    std::vector<tasks::PreparationTask> dataset_tasks;
    for (std::size_t i = 0; i < train_tasks.size(); i += static_cast<std::size_t>(cfg.sl_task_stride))
      dataset_tasks.push_back(train_tasks[i]);
    const std::vector<dynamics::BathParams> baths =
        cfg.case_id == 3 ? grid.training
                         : std::vector<dynamics::BathParams>{detail::training_bath(cfg)};

    const fs::path dataset_path = out_dir / "dataset.csv";
    require_absent_or_force(dataset_path, force);
    const auto dataset = sl::generate_dataset(
        dataset_tasks, baths, cfg.case_id, cfg.seeds.train, label_opts,
        [&log](std::size_t done, std::size_t total) {
          if (done % 500 == 0 || done == total)
            log << "labeled " << done << "/" << total << " rollouts\n";
        });
    std::string dataset_csv = sl::dataset_csv_header(cfg.case_id);
    sl::append_dataset_rows(dataset_csv, dataset.train);
    sl::append_dataset_rows(dataset_csv, dataset.validation);
    write_text_file(dataset_path, dataset_csv);
    log << "dataset: " << dataset.train.size() << " train + " << dataset.validation.size()
        << " validation examples (from " << dataset.generated << " candidates)\n";

    auto result = sl::train_classifier(dataset, hyper, cfg.seeds.init, cfg.seeds.train,
                                       [&log](const sl::SlCurveRow& row) {
                                         if (row.epoch % 100 == 0)
                                           log << "epoch " << row.epoch << "  val loss "
                                               << row.validation_loss << "  val acc "
                                               << row.validation_accuracy << "\n";
                                       });
    detail::stamp_common_metadata(result.best, cfg, tasks_file);
    if (cfg.case_id == 3)
      result.best.metadata["bath_grid_hash"] = hex64(tasks::grid_hash(grid));
    result.best.metadata["sl_task_stride"] = cfg.sl_task_stride;
    nn::save_checkpoint(ckpt_path, result.best);
    std::string csv = sl::sl_curve_csv_header();
    sl::append_sl_curve_rows(csv, result.curve);
    write_text_file(curve_path, csv);
    log << "best validation loss " << result.best_validation_loss << " at epoch "
        << result.best_epoch << "\n";
  }
  log << "wrote " << ckpt_path.string() << "\n";
  return 0;
}

inline rollout::RolloutOptions rollout_options(const config::ExperimentConfig& cfg) {
  rollout::RolloutOptions opts;
  opts.zeeman = cfg.zeeman;
  opts.substeps = cfg.substeps;
  opts.deterministic_timing = cfg.deterministic_timing;
  config::detail::take(cfg.overrides, "fidelity_threshold", opts.fidelity_threshold);
  config::detail::take(cfg.overrides, "max_steps", opts.max_steps);
  return opts;
}

/// Evaluate a checkpoint on one task split at the config's bath; writes
/// per-task results and an aggregate summary.
inline int cmd_eval(const config::ExperimentConfig& cfg, const std::string& checkpoint_path,
                    const std::string& split_name, const std::string& tag, bool force,
                    std::ostream& log = std::cout) {
  const auto ckpt = nn::load_checkpoint(checkpoint_path);
  if (ckpt.case_id != cfg.case_id)
    throw std::invalid_argument("checkpoint was trained for case " +
                                std::to_string(ckpt.case_id) + ", config says " +
                                std::to_string(cfg.case_id));
  const auto tasks_file = detail::load_tasks(cfg);
  const std::vector<int>* ids = nullptr;
  if (split_name == "test") {
    ids = &tasks_file.split.test;
  } else if (split_name == "validation") {
    ids = &tasks_file.split.validation;
  } else if (split_name == "train") {
    ids = &tasks_file.split.train;
  } else {
    throw std::invalid_argument("split must be train, validation, or test");
  }
  const auto eval_tasks = tasks::select_tasks(tasks_file.tasks, *ids);

  const std::string suffix = tag.empty() ? "" : "_" + tag;
  const fs::path results_path = fs::path(cfg.out_dir) / ("results" + suffix + ".csv");
  const fs::path summary_path = fs::path(cfg.out_dir) / ("summary" + suffix + ".json");
  require_absent_or_force(results_path, force);
  require_absent_or_force(summary_path, force);

  const auto eval = rollout::evaluate(ckpt.mlp, ckpt.case_id, eval_tasks, cfg.bath,
                                      rollout_options(cfg), cfg.workers);
  const rollout::EvalMeta meta{ckpt.case_id, detail::algorithm_of(ckpt), cfg.bath};
  std::string csv = rollout::results_csv_header();
  rollout::append_result_rows(csv, meta, eval.rows);
  write_text_file(results_path, csv);
  auto j = rollout::summary_to_json(eval.summary, meta, config::config_hash(cfg));
  j["split"] = split_name;
  j["checkpoint"] = checkpoint_path;
  write_text_file(summary_path, j.dump(1) + "\n");

  log << "F_bar " << eval.summary.mean_best_fidelity << "  n_bar " << eval.summary.mean_steps
      << "  t_bar " << eval.summary.mean_design_time << "s  over " << eval.summary.num_tasks
      << " tasks\n";
  log << "wrote " << results_path.string() << " and " << summary_path.string() << "\n";
  return 0;
}

struct SweepPoint {
  dynamics::BathParams bath;
  bool seen_in_training = true;
};

/// Axis values for a one-dimensional environment scan: the training-grid axis
/// plus any held-out probes that vary only along this axis. The other two
/// parameters stay at the scan anchor (0.1, 4, 10).
inline std::vector<SweepPoint> sweep_points(const std::string& axis,
                                            const tasks::GridAxes& axes,
                                            const std::vector<dynamics::BathParams>& held_out) {
  const dynamics::BathParams anchor{0.1, 4.0, 10.0};
  std::vector<SweepPoint> points;
  const auto add_axis = [&](const std::vector<double>& values, auto set) {
    for (const double v : values) {
      dynamics::BathParams b = anchor;
      set(b, v);
      points.push_back({b, true});
    }
  };
  if (axis == "Gamma") {
    add_axis(axes.coupling, [](dynamics::BathParams& b, double v) { b.coupling = v; });
  } else if (axis == "gamma") {
    add_axis(axes.memory_rate, [](dynamics::BathParams& b, double v) { b.memory_rate = v; });
  } else if (axis == "T") {
    add_axis(axes.temperature, [](dynamics::BathParams& b, double v) { b.temperature = v; });
  } else {
    throw std::invalid_argument("axis must be Gamma, gamma, or T");
  }
  for (const auto& h : held_out) {
    const bool on_axis = (axis == "Gamma" && h.memory_rate == anchor.memory_rate &&
                          h.temperature == anchor.temperature) ||
                         (axis == "gamma" && h.coupling == anchor.coupling &&
                          h.temperature == anchor.temperature) ||
                         (axis == "T" && h.coupling == anchor.coupling &&
                          h.memory_rate == anchor.memory_rate);
    if (on_axis) points.push_back({h, false});
  }
  return points;
}

inline std::string sweep_csv_header() {
  return "checkpoint,case,algorithm,axis,Gamma,gamma,T,mean_best_fidelity,dev_above,dev_below,"
         "std_dev,mean_final_fidelity,mean_steps,mean_design_time_s,num_succeeded,"
         "positivity_breaches,seen_in_training\n";
}

/// Scan one or more checkpoints along an environment axis on the test split.
inline int cmd_sweep(const config::ExperimentConfig& cfg,
                     const std::vector<std::string>& checkpoint_paths, const std::string& axis,
                     bool force, std::ostream& log = std::cout) {
  if (checkpoint_paths.empty()) throw std::invalid_argument("sweep needs at least one checkpoint");
  const auto tasks_file = detail::load_tasks(cfg);
  const auto eval_tasks = tasks::select_tasks(tasks_file.tasks, tasks_file.split.test);
  const auto points = sweep_points(axis, tasks::default_axes(), tasks::default_held_out());

  const fs::path sweep_path = fs::path(cfg.out_dir) / ("sweep_" + axis + ".csv");
  require_absent_or_force(sweep_path, force);

  std::string csv = sweep_csv_header();
  for (const auto& path : checkpoint_paths) {
    const auto ckpt = nn::load_checkpoint(path);
    const std::string name = fs::path(path).parent_path().filename().string() + "/" +
                             fs::path(path).stem().string();
    for (const auto& point : points) {
      const auto eval = rollout::evaluate(ckpt.mlp, ckpt.case_id, eval_tasks, point.bath,
                                          rollout_options(cfg), cfg.workers);
      const auto& s = eval.summary;
      csv += name;
      csv += ',';
      csv += std::to_string(ckpt.case_id);
      csv += ',';
      csv += detail::algorithm_of(ckpt);
      csv += ',';
      csv += axis;
      csv += ',';
      csv += format_double(point.bath.coupling);
      csv += ',';
      csv += format_double(point.bath.memory_rate);
      csv += ',';
      csv += format_double(point.bath.temperature);
      csv += ',';
      csv += format_double(s.mean_best_fidelity);
      csv += ',';
      csv += format_double(s.dev_above);
      csv += ',';
      csv += format_double(s.dev_below);
      csv += ',';
      csv += format_double(s.std_dev);
      csv += ',';
      csv += format_double(s.mean_final_fidelity);
      csv += ',';
      csv += format_double(s.mean_steps);
      csv += ',';
      csv += format_double(s.mean_design_time);
      csv += ',';
      csv += std::to_string(s.num_succeeded);
      csv += ',';
      csv += std::to_string(s.positivity_breaches);
      csv += ',';
      csv += point.seen_in_training ? '1' : '0';
      csv += '\n';
      log << name << " " << axis << "=" << format_double(axis == "Gamma" ? point.bath.coupling
                                                         : axis == "gamma" ? point.bath.memory_rate
                                                                           : point.bath.temperature)
          << "  F_bar " << s.mean_best_fidelity << "\n";
    }
  }
  write_text_file(sweep_path, csv);
  log << "wrote " << sweep_path.string() << "\n";
  return 0;
}

/// Concatenate result CSVs (headers must agree) or merge summary JSONs into an
/// array; pure plumbing for plotting pipelines.
inline int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path,
                      bool force, std::ostream& log = std::cout) {
  if (inputs.empty()) throw std::invalid_argument("report needs at least one input file");
  require_absent_or_force(out_path, force);
  const bool csv_mode = fs::path(inputs.front()).extension() == ".csv";
  for (const auto& in : inputs) {
    if ((fs::path(in).extension() == ".csv") != csv_mode)
      throw std::invalid_argument("report inputs must be all CSV or all JSON");
  }
  if (csv_mode) {
    std::string header;
    std::string merged;
    for (const auto& in : inputs) {
      const std::string text = read_text_file(in);
      const auto nl = text.find('\n');
      if (nl == std::string::npos) throw std::runtime_error(in + ": missing header row");
      const std::string this_header = text.substr(0, nl + 1);
      if (header.empty()) {
        header = this_header;
        merged = header;
      } else if (this_header != header) {
        throw std::runtime_error(in + ": header does not match the first input");
      }
      merged += text.substr(nl + 1);
    }
    write_text_file(out_path, merged);
  } else {
    nlohmann::json merged = nlohmann::json::array();
    for (const auto& in : inputs) {
      const auto j = nlohmann::json::parse(read_text_file(in));
      if (j.is_array()) {
        for (const auto& item : j) merged.push_back(item);
      } else {
        merged.push_back(j);
      }
    }
    write_text_file(out_path, merged.dump(1) + "\n");
  }
  log << "wrote " << out_path << " from " << inputs.size() << " input(s)\n";
  return 0;
}

}  // namespace qpulse::cli
