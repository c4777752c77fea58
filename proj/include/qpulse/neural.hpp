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

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qpulse/common.hpp"
#include "qpulse/rng.hpp"

namespace qpulse::nn {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Output-layer semantics: raw linear values for Q-heads, log-probabilities
/// for classification heads. Hidden layers are ReLU either way.
enum class Head { kQ, kLogSoftmax };

inline std::string head_name(Head h) { return h == Head::kQ ? "q" : "logsoftmax"; }

inline Head head_from_name(const std::string& s) {
  if (s == "q") return Head::kQ;
  if (s == "logsoftmax") return Head::kLogSoftmax;
  throw std::runtime_error("unknown head kind: " + s);
}

/// Dense feed-forward network. Weights are (fan_out x fan_in); activations
/// flow as column vectors, and batches as matrices with one column per sample.
struct Mlp {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Head head = Head::kQ;

  int input_width() const { return layer_sizes.front(); }
  int output_width() const { return layer_sizes.back(); }
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// He-uniform initialization (bound sqrt(6 / fan_in)) with zero biases, filled
/// from the library's own generator so checkpoints are reproducible across
/// standard libraries. Weight entries are drawn row-major per layer.
inline Mlp init_network(const std::vector<int>& layer_sizes, Head head, std::uint64_t seed) {
  if (layer_sizes.size() < 3) throw std::invalid_argument("network needs at least one hidden layer");
  for (const int n : layer_sizes) {
    if (n < 1) throw std::invalid_argument("network layers must have positive width");
  }
  Mlp mlp;
  mlp.layer_sizes = layer_sizes;
  mlp.head = head;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / fan_in);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return mlp;
}

namespace detail {

inline void apply_log_softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    const double lse = m + std::log((z.col(c).array() - m).exp().sum());
    z.col(c).array() -= lse;
  }
}

}  // namespace detail

/// Batched forward pass; input has one sample per column. Returns the head
/// output (Q-values or log-probabilities) with one column per sample.
inline Eigen::MatrixXd forward_batch(const Mlp& mlp, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != mlp.input_width())
    throw std::invalid_argument("forward: feature width does not match the network input");
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    Eigen::MatrixXd z = (mlp.weights[l] * a).colwise() + mlp.biases[l];
    if (l + 1 < mlp.weights.size()) {
      a = z.cwiseMax(0.0);
    } else {
      if (mlp.head == Head::kLogSoftmax) detail::apply_log_softmax_columns(z);
      a = std::move(z);
    }
  }
  return a;
}

inline Eigen::VectorXd forward(const Mlp& mlp, const Eigen::VectorXd& features) {
  return forward_batch(mlp, features);
}

inline Eigen::VectorXd forward(const Mlp& mlp, const std::vector<double>& features) {
  return forward(mlp, Eigen::Map<const Eigen::VectorXd>(features.data(),
                                                        static_cast<Eigen::Index>(features.size())));
}

/// Lowest-index argmax, the tie-break rule shared by both agents.
inline int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

namespace detail {

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] = inputs, per layer after ReLU
  Eigen::MatrixXd logits;                    // pre-head output
};

inline ForwardTrace forward_trace(const Mlp& mlp, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != mlp.input_width())
    throw std::invalid_argument("forward: feature width does not match the network input");
  ForwardTrace t;
  t.activations.reserve(mlp.weights.size());
  t.activations.push_back(inputs);
  for (std::size_t l = 0; l + 1 < mlp.weights.size(); ++l) {
    t.activations.push_back(
        ((mlp.weights[l] * t.activations.back()).colwise() + mlp.biases[l]).cwiseMax(0.0));
  }
  t.logits = (mlp.weights.back() * t.activations.back()).colwise() + mlp.biases.back();
  return t;
}

/// Backpropagate dLoss/dlogits through the stack; activations must come from
/// forward_trace on the same parameters.
inline Gradients backprop(const Mlp& mlp, const ForwardTrace& trace, Eigen::MatrixXd delta) {
  Gradients g;
  g.weights.resize(mlp.weights.size());
  g.biases.resize(mlp.weights.size());
  for (std::size_t l = mlp.weights.size(); l-- > 0;) {
    g.weights[l].noalias() = delta * trace.activations[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd up = mlp.weights[l].transpose() * delta;
      // ReLU mask: the derivative is 1 only where the activation survived.
      delta = up.cwiseProduct(
          (trace.activations[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

}  // namespace detail

/// Mean-squared TD error on the chosen-action outputs only (targets are held
/// fixed by the caller, so no gradient flows into them). Returns the loss and
/// the full parameter gradient.
inline std::pair<double, Gradients> dqn_loss_and_gradient(const Mlp& mlp,
                                                          const Eigen::MatrixXd& inputs,
                                                          const std::vector<int>& actions,
                                                          const std::vector<double>& targets) {
  if (mlp.head != Head::kQ) throw std::invalid_argument("dqn loss requires a Q head");
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (actions.size() != n || targets.size() != n)
    throw std::invalid_argument("dqn loss: batch size mismatch");
  const auto trace = detail::forward_trace(mlp, inputs);
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(mlp.output_width(), inputs.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const double q = trace.logits(actions[i], col);
    const double err = q - targets[i];
    loss += err * err;
    delta(actions[i], col) = 2.0 * err / static_cast<double>(n);
  }
  return {loss / static_cast<double>(n), detail::backprop(mlp, trace, std::move(delta))};
}

/// Mean negative log-likelihood of the true labels under the log-softmax head;
/// the logit gradient is the classic (softmax - one-hot) / N.
inline std::pair<double, Gradients> nll_loss_and_gradient(const Mlp& mlp,
                                                          const Eigen::MatrixXd& inputs,
                                                          const std::vector<int>& labels) {
  if (mlp.head != Head::kLogSoftmax) throw std::invalid_argument("nll loss requires a log-softmax head");
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (labels.size() != n) throw std::invalid_argument("nll loss: batch size mismatch");
  const auto trace = detail::forward_trace(mlp, inputs);
  Eigen::MatrixXd logp = trace.logits;
  detail::apply_log_softmax_columns(logp);
  double loss = 0.0;
  Eigen::MatrixXd delta = logp.array().exp();
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    loss -= logp(labels[i], col);
    delta(labels[i], col) -= 1.0;
  }
  delta /= static_cast<double>(n);
  return {loss / static_cast<double>(n), detail::backprop(mlp, trace, std::move(delta))};
}

/// Plain mini-batch gradient descent, the paper-faithful default optimizer.
/// Aborts rather than poisons the parameters when a gradient is not finite.
inline void sgd_step(Mlp& mlp, const Gradients& g, double learning_rate) {
  if (g.weights.size() != mlp.weights.size())
    throw std::invalid_argument("sgd_step: gradient/parameter shape mismatch");
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    if (!g.weights[l].allFinite() || !g.biases[l].allFinite())
      throw std::runtime_error("sgd_step: non-finite gradient, aborting update");
    mlp.weights[l] -= learning_rate * g.weights[l];
    mlp.biases[l] -= learning_rate * g.biases[l];
  }
}

/// Adam optimizer state; the sanctioned fallback when plain SGD at the
/// documented learning rates will not converge. Runs that use it record the
/// fact in checkpoint metadata.
struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;
};

inline AdamState make_adam_state(const Mlp& mlp) {
  AdamState s;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    s.mw.push_back(Eigen::MatrixXd::Zero(mlp.weights[l].rows(), mlp.weights[l].cols()));
    s.vw.push_back(Eigen::MatrixXd::Zero(mlp.weights[l].rows(), mlp.weights[l].cols()));
    s.mb.push_back(Eigen::VectorXd::Zero(mlp.biases[l].size()));
    s.vb.push_back(Eigen::VectorXd::Zero(mlp.biases[l].size()));
  }
  return s;
}

inline void adam_step(Mlp& mlp, const Gradients& g, AdamState& state, double learning_rate,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (g.weights.size() != mlp.weights.size())
    throw std::invalid_argument("adam_step: gradient/parameter shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    if (!g.weights[l].allFinite() || !g.biases[l].allFinite())
      throw std::runtime_error("adam_step: non-finite gradient, aborting update");
    state.mw[l] = beta1 * state.mw[l] + (1.0 - beta1) * g.weights[l];
    state.vw[l] = beta2 * state.vw[l] + (1.0 - beta2) * g.weights[l].cwiseProduct(g.weights[l]);
    state.mb[l] = beta1 * state.mb[l] + (1.0 - beta1) * g.biases[l];
    state.vb[l] = beta2 * state.vb[l] + (1.0 - beta2) * g.biases[l].cwiseProduct(g.biases[l]);
    mlp.weights[l].array() -=
        learning_rate * (state.mw[l].array() / c1) / ((state.vw[l].array() / c2).sqrt() + eps);
    mlp.biases[l].array() -=
        learning_rate * (state.mb[l].array() / c1) / ((state.vb[l].array() / c2).sqrt() + eps);
  }
}

/// Overwrite destination with source (the DQN target-network sync). The nets
/// must have been built with identical layer sizes.
inline void copy_parameters(const Mlp& source, Mlp& destination) {
  if (source.layer_sizes != destination.layer_sizes)
    throw std::invalid_argument("copy_parameters: layer sizes differ");
  destination.weights = source.weights;
  destination.biases = source.biases;
  destination.head = source.head;
}

struct Checkpoint {
  Mlp mlp;
  int case_id = 1;
  nlohmann::json metadata;  ///< seeds, epoch, bath grid hash, conventions.
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["head"] = head_name(ckpt.mlp.head);
  j["case"] = ckpt.case_id;
  j["layer_sizes"] = ckpt.mlp.layer_sizes;
  auto& jw = j["weights"] = nlohmann::json::array();
  auto& jb = j["biases"] = nlohmann::json::array();
  for (std::size_t l = 0; l < ckpt.mlp.weights.size(); ++l) {
    const auto& w = ckpt.mlp.weights[l];
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
      rows.push_back(std::move(row));
    }
    jw.push_back(std::move(rows));
    nlohmann::json bias = nlohmann::json::array();
    for (Eigen::Index r = 0; r < ckpt.mlp.biases[l].size(); ++r)
      bias.push_back(ckpt.mlp.biases[l](r));
    jb.push_back(std::move(bias));
  }
  j["metadata"] = ckpt.metadata;
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion)
    throw std::runtime_error("checkpoint: unsupported schema_version");
  Checkpoint ckpt;
  ckpt.case_id = j.at("case").get<int>();
  ckpt.metadata = j.value("metadata", nlohmann::json::object());
  ckpt.mlp.head = head_from_name(j.at("head").get<std::string>());
  ckpt.mlp.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  const auto& jw = j.at("weights");
  const auto& jb = j.at("biases");
  if (jw.size() + 1 != ckpt.mlp.layer_sizes.size() || jb.size() != jw.size())
    throw std::runtime_error("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < jw.size(); ++l) {
    const int rows = ckpt.mlp.layer_sizes[l + 1];
    const int cols = ckpt.mlp.layer_sizes[l];
    if (static_cast<int>(jw[l].size()) != rows)
      throw std::runtime_error("checkpoint: weight matrix shape mismatch");
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      if (static_cast<int>(jw[l][static_cast<std::size_t>(r)].size()) != cols)
        throw std::runtime_error("checkpoint: weight matrix shape mismatch");
      for (int c = 0; c < cols; ++c)
        w(r, c) = jw[l][static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
    Eigen::VectorXd b(rows);
    if (static_cast<int>(jb[l].size()) != rows)
      throw std::runtime_error("checkpoint: bias shape mismatch");
    for (int r = 0; r < rows; ++r) b(r) = jb[l][static_cast<std::size_t>(r)].get<double>();
    ckpt.mlp.weights.push_back(std::move(w));
    ckpt.mlp.biases.push_back(std::move(b));
  }
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_text_file(path, checkpoint_to_json(ckpt).dump(1) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace qpulse::nn
