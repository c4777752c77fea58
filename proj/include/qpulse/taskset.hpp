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

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "qpulse/common.hpp"
#include "qpulse/dynamics.hpp"
#include "qpulse/rng.hpp"

namespace qpulse::tasks {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kNumStates = 32;
inline constexpr int kNumTasks = kNumStates * (kNumStates - 1);

struct BlochState {
  double theta = 0.0;
  double phi_az = 0.0;
};

inline Mat2 density_of(const BlochState& s) { return bloch_density(s.theta, s.phi_az); }

/// The 32-state alphabet: both poles, then three latitude rings at
/// theta = pi/4, pi/2, 3pi/4, each holding 10 equally spaced azimuths.
/// Deterministic and seed-free; state 0 is |0> and state 1 is |1>.
inline std::array<BlochState, kNumStates> sample_bloch_states() {
  std::array<BlochState, kNumStates> states{};
  states[0] = {0.0, 0.0};
  states[1] = {kPi, 0.0};
  int idx = 2;
  for (const double theta : {kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0}) {
    for (int k = 0; k < 10; ++k) {
      states[static_cast<std::size_t>(idx++)] = {theta, 2.0 * kPi * k / 10.0};
    }
  }
  return states;
}

/// Density matrix of an alphabet entry by index, the form tasks store.
inline Mat2 density_of_state(int index) {
  if (index < 0 || index >= kNumStates) throw std::out_of_range("state index outside alphabet");
  static const auto alphabet = sample_bloch_states();
  return density_of(alphabet[static_cast<std::size_t>(index)]);
}

struct PreparationTask {
  int id = 0;
  int ini = 0;  ///< Index into the state alphabet.
  int tar = 0;
};

/// All 992 ordered pairs of distinct alphabet states in lexicographic order;
/// ids run 0..991 without gaps (id = 31*ini + tar, with tar shifted down past
/// the skipped diagonal).
inline std::vector<PreparationTask> enumerate_tasks() {
  std::vector<PreparationTask> out;
  out.reserve(kNumTasks);
  for (int i = 0; i < kNumStates; ++i) {
    for (int j = 0; j < kNumStates; ++j) {
      if (j == i) continue;
      out.push_back({(kNumStates - 1) * i + (j < i ? j : j - 1), i, j});
    }
  }
  return out;
}

struct TaskSplit {
  std::uint64_t shuffle_seed = 0;
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
};

/// Shuffle the 992 ids with Fisher-Yates under the given seed and slice into
/// train/validation/test. The split depends only on the seed.
inline TaskSplit split_tasks(std::uint64_t seed, int n_train = 700, int n_val = 50) {
  if (n_train < 1 || n_val < 0 || n_train + n_val >= kNumTasks)
    throw std::invalid_argument("split sizes must leave a nonempty test set");
  std::vector<int> ids(kNumTasks);
  for (int i = 0; i < kNumTasks; ++i) ids[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(ids);
  TaskSplit split;
  split.shuffle_seed = seed;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.validation.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test.assign(ids.begin() + n_train + n_val, ids.end());
  return split;
}

/// Resolve split ids against the full task list (which is ordered by id).
inline std::vector<PreparationTask> select_tasks(const std::vector<PreparationTask>& all,
                                                 const std::vector<int>& ids) {
  std::vector<PreparationTask> out;
  out.reserve(ids.size());
  for (const int id : ids) {
    const auto& task = all.at(static_cast<std::size_t>(id));
    if (task.id != id) throw std::invalid_argument("task list is not ordered by id");
    out.push_back(task);
  }
  return out;
}

struct EnvironmentGrid {
  std::vector<dynamics::BathParams> training;
  std::vector<dynamics::BathParams> held_out;
};

struct GridAxes {
  std::vector<double> coupling;
  std::vector<double> memory_rate;
  std::vector<double> temperature;
};

inline bool same_bath(const dynamics::BathParams& a, const dynamics::BathParams& b) {
  return a.coupling == b.coupling && a.memory_rate == b.memory_rate &&
         a.temperature == b.temperature;
}

/// Cartesian product of the axis values (coupling outermost, temperature
/// fastest) plus a separate held-out list for generalization probes. A
/// held-out point that collides with a grid point is a configuration mistake
/// and is rejected rather than silently dropped.
inline EnvironmentGrid make_grid(const GridAxes& axes,
                                 const std::vector<dynamics::BathParams>& held_out = {}) {
  if (axes.coupling.empty() || axes.memory_rate.empty() || axes.temperature.empty())
    throw std::invalid_argument("environment grid: every axis needs at least one value");
  EnvironmentGrid grid;
  for (const double g : axes.coupling) {
    for (const double m : axes.memory_rate) {
      for (const double t : axes.temperature) {
        const dynamics::BathParams bath{g, m, t};
        bath.validate();
        grid.training.push_back(bath);
      }
    }
  }
  for (const auto& h : held_out) {
    h.validate();
    for (const auto& p : grid.training) {
      if (same_bath(h, p))
        throw std::invalid_argument("held-out bath point collides with the training grid");
    }
    grid.held_out.push_back(h);
  }
  return grid;
}

/// Training ranges mirroring the environment scans the models are evaluated
/// over; all values are configuration, these are only the defaults.
inline GridAxes default_axes() {
  return {{0.0, 0.01, 0.1, 0.2, 0.4}, {2.0, 4.0, 8.0}, {5.0, 10.0, 20.0}};
}

/// Off-grid probe points, one between-the-knots value per axis direction.
inline std::vector<dynamics::BathParams> default_held_out() {
  return {{0.05, 4.0, 10.0}, {0.3, 4.0, 10.0}, {0.1, 6.0, 10.0}, {0.1, 4.0, 15.0}};
}

inline nlohmann::json bath_to_json(const dynamics::BathParams& b) {
  return {{"Gamma", b.coupling}, {"gamma", b.memory_rate}, {"T", b.temperature}};
}

inline dynamics::BathParams bath_from_json(const nlohmann::json& j) {
  dynamics::BathParams b{j.at("Gamma").get<double>(), j.at("gamma").get<double>(),
                         j.at("T").get<double>()};
  b.validate();
  return b;
}

struct TasksFile {
  std::array<BlochState, kNumStates> states;
  std::vector<PreparationTask> tasks;
  TaskSplit split;
};

inline nlohmann::json tasks_file_to_json(const TasksFile& f) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["shuffle_seed"] = f.split.shuffle_seed;
  auto& js = j["states"] = nlohmann::json::array();
  for (const auto& s : f.states) js.push_back({{"theta", s.theta}, {"phi_az", s.phi_az}});
  auto& jt = j["tasks"] = nlohmann::json::array();
  for (const auto& t : f.tasks)
    jt.push_back({{"id", t.id}, {"ini_index", t.ini}, {"tar_index", t.tar}});
  j["split"] = {{"train", f.split.train},
                {"validation", f.split.validation},
                {"test", f.split.test}};
  return j;
}

inline TasksFile tasks_file_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw std::runtime_error("tasks file: unsupported schema_version");
  TasksFile f;
  const auto& js = j.at("states");
  if (js.size() != kNumStates) throw std::runtime_error("tasks file: expected 32 states");
  for (std::size_t i = 0; i < kNumStates; ++i) {
    f.states[i] = {js[i].at("theta").get<double>(), js[i].at("phi_az").get<double>()};
  }
  for (const auto& jt : j.at("tasks")) {
    f.tasks.push_back({jt.at("id").get<int>(), jt.at("ini_index").get<int>(),
                       jt.at("tar_index").get<int>()});
  }
  if (f.tasks.size() != kNumTasks) throw std::runtime_error("tasks file: expected 992 tasks");
  f.split.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  f.split.train = j.at("split").at("train").get<std::vector<int>>();
  f.split.validation = j.at("split").at("validation").get<std::vector<int>>();
  f.split.test = j.at("split").at("test").get<std::vector<int>>();
  return f;
}

inline TasksFile build_tasks_file(std::uint64_t seed, int n_train = 700, int n_val = 50) {
  return TasksFile{sample_bloch_states(), enumerate_tasks(), split_tasks(seed, n_train, n_val)};
}

inline nlohmann::json grid_to_json(const EnvironmentGrid& g) {
  nlohmann::json j;
  auto& jt = j["training"] = nlohmann::json::array();
  for (const auto& b : g.training) jt.push_back(bath_to_json(b));
  auto& jh = j["held_out"] = nlohmann::json::array();
  for (const auto& b : g.held_out) jh.push_back(bath_to_json(b));
  return j;
}

inline EnvironmentGrid grid_from_json(const nlohmann::json& j) {
  EnvironmentGrid g;
  for (const auto& jb : j.at("training")) g.training.push_back(bath_from_json(jb));
  for (const auto& jb : j.at("held_out")) g.held_out.push_back(bath_from_json(jb));
  if (g.training.empty()) throw std::runtime_error("grid file: empty training list");
  for (const auto& h : g.held_out) {
    for (const auto& p : g.training) {
      if (same_bath(h, p)) throw std::runtime_error("grid file: held-out point in training");
    }
  }
  return g;
}

/// Stable fingerprint of a grid, recorded in checkpoints so an evaluation can
/// detect that a model was trained against a different environment set.
inline std::uint64_t grid_hash(const EnvironmentGrid& g) {
  return fnv1a64(grid_to_json(g).dump());
}

}  // namespace qpulse::tasks
