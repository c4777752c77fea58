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

#include <functional>
#include <optional>
#include <vector>

#include "qpulse/dynamics.hpp"
#include "qpulse/encoding.hpp"
#include "qpulse/neural.hpp"
#include "qpulse/rollout.hpp"
#include "qpulse/taskset.hpp"

namespace qpulse::drl {

/// Name stamped into checkpoints so a model is never evaluated against a
/// different reward than it was trained on.
inline constexpr const char* kRewardName = "step_fidelity_success_bonus";

struct Experience {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

/// Fixed-capacity ring: once full, each push overwrites the oldest entry.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("replay memory needs capacity > 0");
    buffer_.reserve(std::min<std::size_t>(capacity_, 4096));
  }

  void push(Experience e) {
    if (buffer_.size() < capacity_) {
      buffer_.push_back(std::move(e));
    } else {
      buffer_[cursor_] = std::move(e);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& entry(std::size_t i) const { return buffer_.at(i); }

  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    return rng.sample_without_replacement(buffer_.size(), count);
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Experience> buffer_;
};

/// Exploitation probability: epsilon here is the chance of taking the argmax
/// action, so it anneals upward and is pinned to 1 for greedy evaluation.
struct EpsilonSchedule {
  double value = 0.0;
  double increment = 0.001;
  double cap = 0.95;

  void advance() { value = std::min(cap, value + increment); }
};

struct DqnHyper {
  int case_id = 1;
  std::vector<int> hidden_sizes = {32, 64, 32};
  double learning_rate = 0.002;
  int batch_size = 32;
  std::size_t memory_capacity = 20000;
  int target_copy_every = 200;  ///< in learn steps
  double discount = 0.9;
  double epsilon_start = 0.0;
  double epsilon_increment = 0.001;
  double epsilon_cap = 0.95;
  int epochs = 10000;
  int validation_every = 200;
  double fidelity_threshold = dynamics::kFidelityThreshold;
  int max_steps = dynamics::kMaxSteps;
  int substeps = dynamics::kDefaultSubsteps;
  double zeeman = dynamics::kDefaultZeeman;
  double success_bonus = 10.0;
  std::string optimizer = "sgd";  ///< "sgd" or "adam"
};

/// Published hyperparameters: one small Q-network for the per-environment
/// cases and a wider, deeper one once bath parameters join the features.
inline DqnHyper default_dqn_hyper(int case_id) {
  DqnHyper h;
  h.case_id = case_id;
  switch (case_id) {
    case 1:
    case 2:
      h.hidden_sizes = {32, 64, 32};
      h.learning_rate = 0.002;
      break;
    case 3:
      h.hidden_sizes = {44, 88, 176, 88, 44};
      h.learning_rate = 0.001;
      break;
    default:
      throw std::invalid_argument("case must be 1, 2, or 3");
  }
  return h;
}

inline std::vector<int> layer_sizes(const DqnHyper& h) {
  std::vector<int> sizes{encoding::feature_width(h.case_id)};
  sizes.insert(sizes.end(), h.hidden_sizes.begin(), h.hidden_sizes.end());
  sizes.push_back(dynamics::kNumActions);
  return sizes;
}

inline double compute_reward(double fidelity, bool reached_threshold,
                             double success_bonus = 10.0) {
  return reached_threshold ? success_bonus : fidelity;
}

/// Epsilon-greedy with the exploitation-probability convention; ties in the
/// Q-values resolve to the lowest action index.
inline int select_action(const nn::Mlp& policy, const std::vector<double>& features,
                         double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon outside [0, 1]");
  if (rng.uniform() < epsilon) return nn::argmax(nn::forward(policy, features));
  return static_cast<int>(rng.uniform_int(dynamics::kNumActions));
}

/// One gradient update from a uniformly sampled batch. Terminal transitions
/// contribute their reward alone; the rest bootstrap through the target net.
/// Returns the batch loss, or nothing when the memory cannot fill a batch yet.
inline std::optional<double> learn_step(nn::Mlp& main, const nn::Mlp& target,
                                        const ReplayMemory& memory, Rng& rng,
                                        const DqnHyper& hyper,
                                        nn::AdamState* adam = nullptr) {
  const auto n = static_cast<std::size_t>(hyper.batch_size);
  if (memory.size() < n) return std::nullopt;
  const auto picks = memory.sample_indices(n, rng);

  const int width = main.input_width();
  Eigen::MatrixXd states(width, hyper.batch_size);
  Eigen::MatrixXd next_states(width, hyper.batch_size);
  std::vector<int> actions(n);
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Experience& e = memory.entry(picks[i]);
    const auto col = static_cast<Eigen::Index>(i);
    states.col(col) = Eigen::Map<const Eigen::VectorXd>(e.state.data(), width);
    next_states.col(col) = Eigen::Map<const Eigen::VectorXd>(e.next_state.data(), width);
    actions[i] = e.action;
  }
  const Eigen::MatrixXd next_q = nn::forward_batch(target, next_states);
  for (std::size_t i = 0; i < n; ++i) {
    const Experience& e = memory.entry(picks[i]);
    targets[i] = e.terminal
                     ? e.reward
                     : e.reward + hyper.discount * next_q.col(static_cast<Eigen::Index>(i)).maxCoeff();
  }
  auto [loss, grads] = nn::dqn_loss_and_gradient(main, states, actions, targets);
  if (adam != nullptr) {
    nn::adam_step(main, grads, *adam, hyper.learning_rate);
  } else {
    nn::sgd_step(main, grads, hyper.learning_rate);
  }
  return loss;
}

struct EpisodeRecord {
  double cumulative_reward = 0.0;  ///< discounted sum over the episode
  double best_fidelity = 0.0;
  int steps = 0;
  bool succeeded = false;
  double loss_sum = 0.0;
  int learn_steps = 0;
};

/// Owns the networks, replay memory, schedules, and counters of one training
/// run, so learn-step cadence and the target-copy counter persist across
/// episodes exactly as they would in one long loop.
class DqnTrainer {
 public:
  DqnTrainer(DqnHyper hyper, std::uint64_t init_seed, std::uint64_t train_seed)
      : hyper_(std::move(hyper)),
        main_(nn::init_network(layer_sizes(hyper_), nn::Head::kQ, init_seed)),
        target_(main_),
        memory_(hyper_.memory_capacity),
        rng_(train_seed) {
    epsilon_.value = hyper_.epsilon_start;
    epsilon_.increment = hyper_.epsilon_increment;
    epsilon_.cap = hyper_.epsilon_cap;
    if (hyper_.optimizer == "adam") {
      adam_ = nn::make_adam_state(main_);
    } else if (hyper_.optimizer != "sgd") {
      throw std::invalid_argument("optimizer must be sgd or adam");
    }
  }

  EpisodeRecord run_episode(const tasks::PreparationTask& task,
                            const dynamics::BathParams& bath) {
    const Mat2 rho_tar = tasks::density_of_state(task.tar);
    const encoding::Povm p_tar = encoding::encode_density(rho_tar);
    dynamics::EvolutionState state = dynamics::initial_state(tasks::density_of_state(task.ini));
    auto features = encoding::build_features(encoding::encode_density(state.rho), p_tar, bath,
                                             hyper_.case_id);
    EpisodeRecord rec;
    double discount_pow = 1.0;
    for (int step = 1; step <= hyper_.max_steps; ++step) {
      const int action_index = select_action(main_, features, epsilon_.value, rng_);
      state = dynamics::propagate(state, dynamics::action_from_index(action_index), bath,
                                  hyper_.zeeman, dynamics::kIntervalDuration, hyper_.substeps);
      const double f = dynamics::model_fidelity(state.rho, rho_tar);
      const bool success = f >= hyper_.fidelity_threshold;
      const bool terminal = success || step == hyper_.max_steps;
      const double reward = compute_reward(f, success, hyper_.success_bonus);
      auto next_features = encoding::build_features(encoding::encode_density(state.rho), p_tar,
                                                    bath, hyper_.case_id);
      memory_.push(Experience{std::move(features), action_index, reward, next_features, terminal});
      features = std::move(next_features);

      rec.cumulative_reward += discount_pow * reward;
      discount_pow *= hyper_.discount;
      rec.best_fidelity = std::max(rec.best_fidelity, f);
      rec.steps = step;

      if (const auto loss = learn_step(main_, target_, memory_, rng_, hyper_,
                                       adam_ ? &*adam_ : nullptr)) {
        rec.loss_sum += *loss;
        ++rec.learn_steps;
        epsilon_.advance();
        ++total_learn_steps_;
        if (total_learn_steps_ % hyper_.target_copy_every == 0)
          nn::copy_parameters(main_, target_);
      }
      if (success) {
        rec.succeeded = true;
        break;
      }
    }
    return rec;
  }

  const DqnHyper& hyper() const { return hyper_; }
  const nn::Mlp& main() const { return main_; }
  const nn::Mlp& target() const { return target_; }
  const ReplayMemory& memory() const { return memory_; }
  double epsilon() const { return epsilon_.value; }
  long total_learn_steps() const { return total_learn_steps_; }
  Rng& rng() { return rng_; }

 private:
  DqnHyper hyper_;
  nn::Mlp main_;
  nn::Mlp target_;
  ReplayMemory memory_;
  EpsilonSchedule epsilon_;
  std::optional<nn::AdamState> adam_;
  long total_learn_steps_ = 0;
  Rng rng_;
};

/// Everything a training run consumes beyond hyperparameters. Cases 1 and 2
/// train on `fixed_bath` (Case 1 simply sets its coupling to zero); Case 3
/// draws uniformly from `bath_pool` each episode. Periodic validation always
/// runs greedily at `validation_bath`.
struct TrainInputs {
  std::vector<tasks::PreparationTask> train_tasks;
  std::vector<tasks::PreparationTask> validation_tasks;
  dynamics::BathParams fixed_bath{0.0, 4.0, 10.0};
  std::vector<dynamics::BathParams> bath_pool;
  dynamics::BathParams validation_bath{0.0, 4.0, 10.0};
};

struct CurveRow {
  int epoch = 0;
  double mean_validation_fidelity = 0.0;
  double mean_cumulative_reward = 0.0;  ///< training episodes since last row
  double epsilon = 0.0;
  double loss_moving_avg = 0.0;
};

struct DrlTrainResult {
  nn::Checkpoint best;
  std::vector<CurveRow> curve;
  double best_validation_fidelity = 0.0;
  int best_epoch = 0;
  int divergent_episodes = 0;
};

inline std::string curve_csv_header() {
  return "epoch,mean_validation_fidelity,mean_cumulative_reward,epsilon,loss_moving_avg\n";
}

inline void append_curve_rows(std::string& out, const std::vector<CurveRow>& rows) {
  for (const auto& r : rows) {
    out += std::to_string(r.epoch);
    out += ',';
    out += format_double(r.mean_validation_fidelity);
    out += ',';
    out += format_double(r.mean_cumulative_reward);
    out += ',';
    out += format_double(r.epsilon);
    out += ',';
    out += format_double(r.loss_moving_avg);
    out += '\n';
  }
}

/// Mean best fidelity of the greedy policy over the validation tasks.
inline double validate_policy(const nn::Mlp& policy, int case_id,
                              const std::vector<tasks::PreparationTask>& tasks,
                              const dynamics::BathParams& bath, const DqnHyper& hyper) {
  rollout::RolloutOptions opts;
  opts.zeeman = hyper.zeeman;
  opts.substeps = hyper.substeps;
  opts.fidelity_threshold = hyper.fidelity_threshold;
  opts.max_steps = hyper.max_steps;
  opts.deterministic_timing = true;
  double sum = 0.0;
  for (const auto& task : tasks)
    sum += rollout::design_trajectory(policy, case_id, task, bath, opts).best_fidelity;
  return tasks.empty() ? 0.0 : sum / static_cast<double>(tasks.size());
}

using ProgressFn = std::function<void(const CurveRow&)>;

/// Full training loop: one episode per epoch on a uniformly drawn training
/// task, greedy validation on a fixed cadence, and best-validation checkpoint
/// selection. Divergent episodes are counted and skipped rather than fatal.
inline DrlTrainResult train(const DqnHyper& hyper, const TrainInputs& inputs,
                            std::uint64_t init_seed, std::uint64_t train_seed,
                            const ProgressFn& progress = {}) {
  if (inputs.train_tasks.empty() || inputs.validation_tasks.empty())
    throw std::invalid_argument("drl train: task splits must be nonempty");
  if (hyper.case_id == 3 && inputs.bath_pool.empty())
    throw std::invalid_argument("drl train: Case 3 needs a bath pool");

  DqnTrainer trainer(hyper, init_seed, train_seed);
  DrlTrainResult result;
  result.best_validation_fidelity = -1.0;

  double window_reward = 0.0;
  double window_loss = 0.0;
  long window_episodes = 0;
  long window_learn_steps = 0;

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const auto& task =
        inputs.train_tasks[trainer.rng().uniform_int(inputs.train_tasks.size())];
    const dynamics::BathParams bath =
        hyper.case_id == 3
            ? inputs.bath_pool[trainer.rng().uniform_int(inputs.bath_pool.size())]
            : inputs.fixed_bath;
    try {
      const EpisodeRecord rec = trainer.run_episode(task, bath);
      window_reward += rec.cumulative_reward;
      window_loss += rec.loss_sum;
      window_learn_steps += rec.learn_steps;
      ++window_episodes;
    } catch (const dynamics::DivergenceError&) {
      ++result.divergent_episodes;
    }

    if (epoch % hyper.validation_every == 0) {
      CurveRow row;
      row.epoch = epoch;
      row.mean_validation_fidelity = validate_policy(
          trainer.main(), hyper.case_id, inputs.validation_tasks, inputs.validation_bath, hyper);
      row.mean_cumulative_reward =
          window_episodes > 0 ? window_reward / static_cast<double>(window_episodes) : 0.0;
      row.epsilon = trainer.epsilon();
      row.loss_moving_avg =
          window_learn_steps > 0 ? window_loss / static_cast<double>(window_learn_steps) : 0.0;
      result.curve.push_back(row);
      window_reward = window_loss = 0.0;
      window_episodes = window_learn_steps = 0;

      if (row.mean_validation_fidelity > result.best_validation_fidelity) {
        result.best_validation_fidelity = row.mean_validation_fidelity;
        result.best_epoch = epoch;
        result.best.mlp = trainer.main();
      }
      if (progress) progress(row);
    }
  }

  result.best.case_id = hyper.case_id;
  result.best.metadata = {{"seed_init", init_seed},
                          {"seed_train", train_seed},
                          {"epoch", result.best_epoch},
                          {"best_validation_fidelity", result.best_validation_fidelity},
                          {"optimizer", hyper.optimizer},
                          {"reward", kRewardName},
                          {"success_bonus", hyper.success_bonus},
                          {"epsilon_convention", "exploit-probability"},
                          {"zeeman", hyper.zeeman},
                          {"substeps", hyper.substeps},
                          {"povm_convention", encoding::kPovmConvention},
                          {"feature_scaling", "raw"}};
  return result;
}

}  // namespace qpulse::drl
