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

#pragma once

#include <chrono>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qpulse/dynamics.hpp"
#include "qpulse/encoding.hpp"
#include "qpulse/neural.hpp"
#include "qpulse/taskset.hpp"

namespace qpulse::rollout {

struct RolloutOptions {
  double zeeman = dynamics::kDefaultZeeman;
  int substeps = dynamics::kDefaultSubsteps;
  double fidelity_threshold = dynamics::kFidelityThreshold;
  int max_steps = dynamics::kMaxSteps;
  /// When set, design_time is reported as exactly 0.0 so that repeated runs
  /// produce byte-identical result files.
  bool deterministic_timing = false;
};

/// One designed pulse sequence. The loop always records every executed step in
/// `fidelities`; for failed tasks `actions` is cut back to the prefix ending at
/// the best step, which is the sequence the designer actually outputs.
struct Trajectory {
  std::vector<dynamics::ControlAction> actions;
  std::vector<double> fidelities;
  double initial_fidelity = 0.0;
  int best_index = -1;  ///< index into fidelities; -1 when no step was needed
  double best_fidelity = 0.0;
  double final_fidelity = 0.0;  ///< fidelity after the last executed step
  double design_time = 0.0;     ///< seconds of decision + propagation loop
  bool succeeded = false;
  bool positivity_breach = false;  ///< some visited state left the Bloch ball
};

/// Run the trained policy greedily from the task's initial state. Works for
/// both head kinds since argmax over Q-values and over log-probabilities is
/// the same selection rule.
inline Trajectory design_trajectory(const nn::Mlp& policy, int case_id, const Mat2& rho_ini,
                                    const Mat2& rho_tar, const dynamics::BathParams& bath,
                                    const RolloutOptions& opts = {}) {
  if (policy.input_width() != encoding::feature_width(case_id))
    throw std::invalid_argument("design_trajectory: checkpoint width does not match the case");
  Trajectory traj;
  const auto t0 = std::chrono::steady_clock::now();
  const encoding::Povm p_tar = encoding::encode_density(rho_tar);

  dynamics::EvolutionState state = dynamics::initial_state(rho_ini);
  traj.initial_fidelity = dynamics::model_fidelity(state.rho, rho_tar);
  if (traj.initial_fidelity >= opts.fidelity_threshold) {
    traj.best_fidelity = traj.initial_fidelity;
    traj.final_fidelity = traj.initial_fidelity;
    traj.succeeded = true;
    if (!opts.deterministic_timing)
      traj.design_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return traj;
  }

  for (int step = 0; step < opts.max_steps; ++step) {
    const auto features = encoding::build_features(encoding::encode_density(state.rho), p_tar,
                                                   bath, case_id);
    const int action_index = nn::argmax(nn::forward(policy, features));
    const auto action = dynamics::action_from_index(action_index);
    state = dynamics::propagate(state, action, bath, opts.zeeman,
                                dynamics::kIntervalDuration, opts.substeps);
    if (state.rho.determinant().real() < -1e-6) traj.positivity_breach = true;
    const double f = dynamics::model_fidelity(state.rho, rho_tar);
    traj.actions.push_back(action);
    traj.fidelities.push_back(f);
    if (traj.best_index < 0 || f > traj.best_fidelity) {
      traj.best_index = step;
      traj.best_fidelity = f;
    }
    if (f >= opts.fidelity_threshold) {
      traj.succeeded = true;
      break;
    }
  }
  traj.final_fidelity = traj.fidelities.back();
  if (!traj.succeeded)
    traj.actions.resize(static_cast<std::size_t>(traj.best_index) + 1);
  if (!opts.deterministic_timing)
    traj.design_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return traj;
}

inline Trajectory design_trajectory(const nn::Mlp& policy, int case_id,
                                    const tasks::PreparationTask& task,
                                    const dynamics::BathParams& bath,
                                    const RolloutOptions& opts = {}) {
  return design_trajectory(policy, case_id, tasks::density_of_state(task.ini),
                           tasks::density_of_state(task.tar), bath, opts);
}

struct TaskResult {
  int task_id = 0;
  int steps = 0;
  double best_fidelity = 0.0;
  double final_fidelity = 0.0;
  double design_time = 0.0;
  bool succeeded = false;
  bool positivity_breach = false;
};

struct EvalSummary {
  double mean_best_fidelity = 0.0;
  double dev_above = 0.0;  ///< max per-task value minus the mean
  double dev_below = 0.0;  ///< mean minus min per-task value
  double std_dev = 0.0;
  double mean_final_fidelity = 0.0;
  double mean_design_time = 0.0;
  double mean_steps = 0.0;
  int num_tasks = 0;
  int num_succeeded = 0;
  int positivity_breaches = 0;
};

struct EvalResult {
  EvalSummary summary;
  std::vector<TaskResult> rows;
};

inline EvalSummary summarize(const std::vector<TaskResult>& rows) {
  EvalSummary s;
  s.num_tasks = static_cast<int>(rows.size());
  if (rows.empty()) return s;
  double lo = rows.front().best_fidelity;
  double hi = lo;
  for (const auto& r : rows) {
    s.mean_best_fidelity += r.best_fidelity;
    s.mean_final_fidelity += r.final_fidelity;
    s.mean_design_time += r.design_time;
    s.mean_steps += r.steps;
    s.num_succeeded += r.succeeded ? 1 : 0;
    s.positivity_breaches += r.positivity_breach ? 1 : 0;
    lo = std::min(lo, r.best_fidelity);
    hi = std::max(hi, r.best_fidelity);
  }
  const double n = static_cast<double>(rows.size());
  s.mean_best_fidelity /= n;
  s.mean_final_fidelity /= n;
  s.mean_design_time /= n;
  s.mean_steps /= n;
  s.dev_above = hi - s.mean_best_fidelity;
  s.dev_below = s.mean_best_fidelity - lo;
  double var = 0.0;
  for (const auto& r : rows) {
    const double d = r.best_fidelity - s.mean_best_fidelity;
    var += d * d;
  }
  s.std_dev = std::sqrt(var / n);
  return s;
}

namespace detail {

// The serial branch and every pool thread must execute this exact instance;
// letting the optimizer inline per-call-site copies can reorder floating
// point contractions and make the worker count visible in the last bit.
QPULSE_SINGLE_INSTANCE inline void evaluate_range(
    const nn::Mlp& policy, int case_id, const std::vector<tasks::PreparationTask>& tasks,
    const dynamics::BathParams& bath, const RolloutOptions& opts, std::vector<TaskResult>& rows,
    std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) {
    const auto traj = design_trajectory(policy, case_id, tasks[i], bath, opts);
    rows[i] = TaskResult{tasks[i].id,
                         static_cast<int>(traj.actions.size()),
                         traj.best_fidelity,
                         traj.final_fidelity,
                         traj.design_time,
                         traj.succeeded,
                         traj.positivity_breach};
  }
}

}  // namespace detail

/// Evaluate the policy over a task list at one bath setting. Rows come back in
/// task-list order and with identical values regardless of the worker count;
/// per-task times are measured inside whichever worker ran the task.
inline EvalResult evaluate(const nn::Mlp& policy, int case_id,
                           const std::vector<tasks::PreparationTask>& tasks,
                           const dynamics::BathParams& bath, const RolloutOptions& opts = {},
                           int workers = 1) {
  EvalResult result;
  result.rows.resize(tasks.size());
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    detail::evaluate_range(policy, case_id, tasks, bath, opts, result.rows, 0, tasks.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (tasks.size() + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w) {
      const std::size_t begin = static_cast<std::size_t>(w) * chunk;
      const std::size_t end = std::min(tasks.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(detail::evaluate_range, std::cref(policy), case_id, std::cref(tasks),
                        std::cref(bath), std::cref(opts), std::ref(result.rows), begin, end);
    }
    for (auto& t : pool) t.join();
  }
  result.summary = summarize(result.rows);
  return result;
}

/// Identifies one evaluation setting inside shared CSV output.
struct EvalMeta {
  int case_id = 1;
  std::string algorithm;  ///< "drl" or "sl"
  dynamics::BathParams bath;
};

inline std::string results_csv_header() {
  return "task_id,case,algorithm,Gamma,gamma,T,steps,best_fidelity,final_fidelity,"
         "design_time_s,succeeded\n";
}

inline void append_result_rows(std::string& out, const EvalMeta& meta,
                               const std::vector<TaskResult>& rows) {
  for (const auto& r : rows) {
    out += std::to_string(r.task_id);
    out += ',';
    out += std::to_string(meta.case_id);
    out += ',';
    out += meta.algorithm;
    out += ',';
    out += format_double(meta.bath.coupling);
    out += ',';
    out += format_double(meta.bath.memory_rate);
    out += ',';
    out += format_double(meta.bath.temperature);
    out += ',';
    out += std::to_string(r.steps);
    out += ',';
    out += format_double(r.best_fidelity);
    out += ',';
    out += format_double(r.final_fidelity);
    out += ',';
    out += format_double(r.design_time);
    out += ',';
    out += r.succeeded ? '1' : '0';
    out += '\n';
  }
}

inline nlohmann::json summary_to_json(const EvalSummary& s, const EvalMeta& meta,
                                      const std::string& config_hash) {
  nlohmann::json j;
  j["schema_version"] = tasks::kSchemaVersion;
  j["case"] = meta.case_id;
  j["algorithm"] = meta.algorithm;
  j["bath"] = tasks::bath_to_json(meta.bath);
  j["mean_best_fidelity"] = s.mean_best_fidelity;
  j["dev_above"] = s.dev_above;
  j["dev_below"] = s.dev_below;
  j["std_dev"] = s.std_dev;
  j["mean_final_fidelity"] = s.mean_final_fidelity;
  j["mean_design_time_s"] = s.mean_design_time;
  j["mean_steps"] = s.mean_steps;
  j["num_tasks"] = s.num_tasks;
  j["num_succeeded"] = s.num_succeeded;
  j["positivity_breaches"] = s.positivity_breaches;
  j["config_hash"] = config_hash;
  return j;
}

}  // namespace qpulse::rollout
