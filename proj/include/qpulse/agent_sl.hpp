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
#include <functional>
#include <vector>

#include "qpulse/dynamics.hpp"
#include "qpulse/encoding.hpp"
#include "qpulse/neural.hpp"
#include "qpulse/taskset.hpp"

namespace qpulse::sl {

struct LabeledExample {
  std::vector<double> features;
  int label = 0;
  double fidelity_before = 0.0;
  double fidelity_after = 0.0;
  int task_id = 0;
  dynamics::BathParams bath{0.0, 4.0, 10.0};
};

struct LabelOptions {
  double zeeman = dynamics::kDefaultZeeman;
  int substeps = dynamics::kDefaultSubsteps;
  double fidelity_threshold = dynamics::kFidelityThreshold;
  int max_steps = dynamics::kMaxSteps;
};

struct GreedyLabel {
  int best_action = 0;
  std::array<double, dynamics::kNumActions> fidelities{};
};

/// Try all 27 actions for one interval from the same (rho, memory) snapshot
/// and pick the one with the highest resulting fidelity, lowest index on ties.
/// With zero coupling the three angle variants of each exchange level tie
/// exactly, so the tie-break matters there.
inline GreedyLabel greedy_label_step(const dynamics::EvolutionState& state, const Mat2& rho_tar,
                                     const dynamics::BathParams& bath,
                                     const LabelOptions& opts = {}) {
  GreedyLabel out;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < dynamics::kNumActions; ++a) {
    const auto next = dynamics::propagate(state, dynamics::action_from_index(a), bath,
                                          opts.zeeman, dynamics::kIntervalDuration, opts.substeps);
    const double f = dynamics::model_fidelity(next.rho, rho_tar);
    out.fidelities[static_cast<std::size_t>(a)] = f;
    if (f > best) {
      best = f;
      out.best_action = a;
    }
  }
  return out;
}

struct Dataset {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  int case_id = 1;
  std::uint64_t shuffle_seed = 0;
  std::size_t generated = 0;  ///< examples before the improvement filter
};

/// Greedy rollouts over every (task, bath) pair; each step contributes one
/// candidate example labeled with the locally best action. Steps that fail to
/// improve fidelity are dropped, then the survivors are shuffled and split
/// 80/20 into train/validation.
inline Dataset generate_dataset(const std::vector<tasks::PreparationTask>& tasks,
                                const std::vector<dynamics::BathParams>& baths, int case_id,
                                std::uint64_t shuffle_seed, const LabelOptions& opts = {},
                                const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  if (tasks.empty() || baths.empty())
    throw std::invalid_argument("dataset generation needs tasks and baths");
  std::vector<LabeledExample> kept;
  std::size_t generated = 0;
  std::size_t pair_index = 0;
  const std::size_t total_pairs = tasks.size() * baths.size();
  for (const auto& task : tasks) {
    const Mat2 rho_tar = tasks::density_of_state(task.tar);
    const encoding::Povm p_tar = encoding::encode_density(rho_tar);
    for (const auto& bath : baths) {
      dynamics::EvolutionState state = dynamics::initial_state(tasks::density_of_state(task.ini));
      double f_before = dynamics::model_fidelity(state.rho, rho_tar);
      for (int step = 0; step < opts.max_steps && f_before < opts.fidelity_threshold; ++step) {
        LabeledExample ex;
        ex.features = encoding::build_features(encoding::encode_density(state.rho), p_tar, bath,
                                               case_id);
        const GreedyLabel label = greedy_label_step(state, rho_tar, bath, opts);
        ex.label = label.best_action;
        ex.fidelity_before = f_before;
        ex.fidelity_after = label.fidelities[static_cast<std::size_t>(label.best_action)];
        ex.task_id = task.id;
        ex.bath = bath;
        ++generated;
        if (ex.fidelity_after > ex.fidelity_before) kept.push_back(std::move(ex));
        state = dynamics::propagate(state, dynamics::action_from_index(label.best_action), bath,
                                    opts.zeeman, dynamics::kIntervalDuration, opts.substeps);
        f_before = label.fidelities[static_cast<std::size_t>(label.best_action)];
      }
      ++pair_index;
      if (progress) progress(pair_index, total_pairs);
    }
  }
  if (kept.empty())
    throw std::runtime_error("dataset generation: no example improved fidelity");

  Rng rng(shuffle_seed);
  rng.shuffle(kept);
  const std::size_t n_train = kept.size() * 8 / 10;
  Dataset out;
  out.case_id = case_id;
  out.shuffle_seed = shuffle_seed;
  out.generated = generated;
  out.train.assign(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(kept.begin() + static_cast<std::ptrdiff_t>(n_train), kept.end());
  return out;
}

inline std::string dataset_csv_header(int case_id) {
  std::string header;
  for (int i = 0; i < encoding::feature_width(case_id); ++i) {
    header += "f";
    header += std::to_string(i);
    header += ',';
  }
  header += "label,fidelity_before,fidelity_after,task_id,Gamma,gamma,T\n";
  return header;
}

inline void append_dataset_rows(std::string& out, const std::vector<LabeledExample>& rows) {
  for (const auto& ex : rows) {
    for (const double f : ex.features) {
      out += format_double(f);
      out += ',';
    }
    out += std::to_string(ex.label);
    out += ',';
    out += format_double(ex.fidelity_before);
    out += ',';
    out += format_double(ex.fidelity_after);
    out += ',';
    out += std::to_string(ex.task_id);
    out += ',';
    out += format_double(ex.bath.coupling);
    out += ',';
    out += format_double(ex.bath.memory_rate);
    out += ',';
    out += format_double(ex.bath.temperature);
    out += '\n';
  }
}

struct SlHyper {
  int case_id = 1;
  std::vector<int> hidden_sizes = {32, 64, 32};
  double learning_rate = 0.001;
  int batch_size = 16;
  int epochs = 500;
  std::string optimizer = "sgd";  ///< "sgd" or "adam"
};

/// Published classifier hyperparameters, mirroring the Q-network widths.
inline SlHyper default_sl_hyper(int case_id) {
  SlHyper h;
  h.case_id = case_id;
  switch (case_id) {
    case 1:
    case 2:
      h.hidden_sizes = {32, 64, 32};
      break;
    case 3:
      h.hidden_sizes = {44, 88, 176, 88, 44};
      break;
    default:
      throw std::invalid_argument("case must be 1, 2, or 3");
  }
  return h;
}

inline std::vector<int> layer_sizes(const SlHyper& h) {
  std::vector<int> sizes{encoding::feature_width(h.case_id)};
  sizes.insert(sizes.end(), h.hidden_sizes.begin(), h.hidden_sizes.end());
  sizes.push_back(dynamics::kNumActions);
  return sizes;
}

struct SlCurveRow {
  int epoch = 0;
  double train_loss = 0.0;       ///< mean over the epoch's mini-batches
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct SlTrainResult {
  nn::Checkpoint best;
  std::vector<SlCurveRow> curve;
  double best_validation_loss = 0.0;
  int best_epoch = 0;
};

inline std::string sl_curve_csv_header() {
  return "epoch,train_loss,validation_loss,validation_accuracy\n";
}

inline void append_sl_curve_rows(std::string& out, const std::vector<SlCurveRow>& rows) {
  for (const auto& r : rows) {
    out += std::to_string(r.epoch);
    out += ',';
    out += format_double(r.train_loss);
    out += ',';
    out += format_double(r.validation_loss);
    out += ',';
    out += format_double(r.validation_accuracy);
    out += '\n';
  }
}

namespace detail {

inline Eigen::MatrixXd pack_features(const std::vector<LabeledExample>& rows,
                                     const std::vector<std::size_t>& picks, int width) {
  Eigen::MatrixXd x(width, static_cast<Eigen::Index>(picks.size()));
  for (std::size_t i = 0; i < picks.size(); ++i)
    x.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(rows[picks[i]].features.data(), width);
  return x;
}

struct ValScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline ValScore score(const nn::Mlp& mlp, const std::vector<LabeledExample>& rows) {
  const int width = mlp.input_width();
  std::vector<std::size_t> all(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) all[i] = i;
  const Eigen::MatrixXd x = pack_features(rows, all, width);
  const Eigen::MatrixXd logp = nn::forward_batch(mlp, x);
  ValScore s;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    s.loss -= logp(rows[i].label, col);
    if (nn::argmax(logp.col(col)) == rows[i].label) s.accuracy += 1.0;
  }
  s.loss /= static_cast<double>(rows.size());
  s.accuracy /= static_cast<double>(rows.size());
  return s;
}

}  // namespace detail

using SlProgressFn = std::function<void(const SlCurveRow&)>;

/// Shuffled mini-batch NLL training with per-epoch validation scoring; keeps
/// the checkpoint with the lowest validation loss.
inline SlTrainResult train_classifier(const Dataset& dataset, const SlHyper& hyper,
                                      std::uint64_t init_seed, std::uint64_t train_seed,
                                      const SlProgressFn& progress = {}) {
  if (dataset.train.empty() || dataset.validation.empty())
    throw std::invalid_argument("sl train: dataset splits must be nonempty");
  if (dataset.case_id != hyper.case_id)
    throw std::invalid_argument("sl train: dataset and hyperparameters disagree on the case");

  nn::Mlp mlp = nn::init_network(layer_sizes(hyper), nn::Head::kLogSoftmax, init_seed);
  std::optional<nn::AdamState> adam;
  if (hyper.optimizer == "adam") {
    adam = nn::make_adam_state(mlp);
  } else if (hyper.optimizer != "sgd") {
    throw std::invalid_argument("optimizer must be sgd or adam");
  }
  Rng rng(train_seed);
  const int width = mlp.input_width();

  SlTrainResult result;
  result.best_validation_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(dataset.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    long batches = 0;
    const auto bs = static_cast<std::size_t>(hyper.batch_size);
    for (std::size_t begin = 0; begin < order.size(); begin += bs) {
      const std::size_t end = std::min(order.size(), begin + bs);
      const std::vector<std::size_t> picks(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      const Eigen::MatrixXd x = detail::pack_features(dataset.train, picks, width);
      std::vector<int> labels(picks.size());
      for (std::size_t i = 0; i < picks.size(); ++i) labels[i] = dataset.train[picks[i]].label;
      auto [loss, grads] = nn::nll_loss_and_gradient(mlp, x, labels);
      if (adam) {
        nn::adam_step(mlp, grads, *adam, hyper.learning_rate);
      } else {
        nn::sgd_step(mlp, grads, hyper.learning_rate);
      }
      loss_sum += loss;
      ++batches;
    }
    const auto val = detail::score(mlp, dataset.validation);
    SlCurveRow row{epoch, loss_sum / static_cast<double>(batches), val.loss, val.accuracy};
    result.curve.push_back(row);
    if (val.loss < result.best_validation_loss) {
      result.best_validation_loss = val.loss;
      result.best_epoch = epoch;
      result.best.mlp = mlp;
    }
    if (progress) progress(row);
  }

  result.best.case_id = hyper.case_id;
  result.best.metadata = {{"seed_init", init_seed},
                          {"seed_train", train_seed},
                          {"seed_shuffle", dataset.shuffle_seed},
                          {"epoch", result.best_epoch},
                          {"best_validation_loss", result.best_validation_loss},
                          {"optimizer", hyper.optimizer},
                          {"dataset_train_examples", dataset.train.size()},
                          {"dataset_validation_examples", dataset.validation.size()},
                          {"povm_convention", encoding::kPovmConvention},
                          {"feature_scaling", "raw"}};
  return result;
}

}  // namespace qpulse::sl
