#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "hetal/common.hpp"

namespace hetal {

enum class Activation { relu };

// Architecture of a dense feedforward classifier. layer_widths runs from the
// input dimension through the hidden widths to the number of classes.
struct ModelConfig {
  std::vector<int> layer_widths;
  Activation activation = Activation::relu;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  int input_dim() const { return layer_widths.front(); }
  int n_classes() const { return layer_widths.back(); }
  // Number of weight matrices.
  int n_layers() const { return static_cast<int>(layer_widths.size()) - 1; }
  // Width of the penultimate representation. For a linear model (no hidden
  // layer) the input itself plays that role.
  int hidden_dim() const {
    return layer_widths.size() > 2 ? layer_widths[layer_widths.size() - 2] : layer_widths.front();
  }

  void validate() const {
    if (layer_widths.size() < 2) throw ConfigError("ModelConfig: need at least 2 layer widths");
    for (int w : layer_widths)
      if (w <= 0) throw ConfigError("ModelConfig: layer widths must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw ConfigError("ModelConfig: dropout_rate must lie in [0,1)");
  }
};

// Parameters plus Adam moments. Weight matrix l has shape (width[l+1] x width[l]).
struct ModelState {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::MatrixXd> adam_m_w, adam_v_w;
  std::vector<Eigen::VectorXd> adam_m_b, adam_v_b;
  long step_count = 0;
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Shadow copy of the tracked parameters, updated as
//   shadow <- alpha * shadow + (1 - alpha) * current.
struct EmaState {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double alpha = 0.999;
};

struct PredictionBatch {
  Eigen::MatrixXd probs;   // n x n_classes, rows sum to 1
  Eigen::MatrixXd hidden;  // n x hidden_dim, post-activation penultimate output
  std::optional<Eigen::VectorXd> losses;
};

struct DropoutMode {
  bool stochastic = false;
  std::uint64_t seed = 0;

  static DropoutMode off() { return {}; }
  static DropoutMode stochastic_seeded(std::uint64_t seed) { return {true, seed}; }
};

namespace detail {

inline void check_state_shapes(const ModelState& state, const ModelConfig& config) {
  const int L = config.n_layers();
  if (static_cast<int>(state.weights.size()) != L || static_cast<int>(state.biases.size()) != L)
    throw DimensionError("model state layer count does not match config");
  for (int l = 0; l < L; ++l) {
    if (state.weights[l].rows() != config.layer_widths[l + 1] ||
        state.weights[l].cols() != config.layer_widths[l])
      throw DimensionError("weight matrix shape does not match config");
    if (state.biases[l].size() != config.layer_widths[l + 1])
      throw DimensionError("bias shape does not match config");
  }
}

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> pre;   // pre-activation per layer
  std::vector<Eigen::MatrixXd> post;  // post-activation (and dropout) per layer; post[0] = x
};

// Shared forward pass over explicit weight/bias arrays so both the live model
// and its EMA shadow go through one code path.
inline ForwardTrace forward_trace(const std::vector<Eigen::MatrixXd>& weights,
                                  const std::vector<Eigen::VectorXd>& biases,
                                  const ModelConfig& config, const Eigen::MatrixXd& x,
                                  DropoutMode dropout) {
  config.validate();
  if (x.cols() != config.input_dim())
    throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                         " columns, expected " + std::to_string(config.input_dim()));
  if (!x.allFinite()) throw InputError("forward: non-finite input features");

  const int L = config.n_layers();
  ForwardTrace t;
  t.pre.resize(L);
  t.post.resize(L + 1);
  t.post[0] = x;

  Rng drop_rng(dropout.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep = 1.0 - config.dropout_rate;

  for (int l = 0; l < L; ++l) {
    t.pre[l] = (t.post[l] * weights[l].transpose()).rowwise() + biases[l].transpose();
    if (l + 1 < L) {
      t.post[l + 1] = t.pre[l].cwiseMax(0.0);  // relu
      if (dropout.stochastic && config.dropout_rate > 0.0) {
        // Inverted dropout on hidden activations only.
        Eigen::MatrixXd& a = t.post[l + 1];
        for (Eigen::Index i = 0; i < a.rows(); ++i)
          for (Eigen::Index j = 0; j < a.cols(); ++j)
            a(i, j) = unit(drop_rng) < keep ? a(i, j) / keep : 0.0;
      }
    } else {
      t.post[l + 1] = t.pre[l];  // logits
    }
  }
  return t;
}

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  return p.array().colwise() / p.rowwise().sum().array();
}

// Row-wise log-sum-exp with max subtraction.
inline Eigen::VectorXd logsumexp_rows(const Eigen::MatrixXd& logits) {
  Eigen::VectorXd mx = logits.rowwise().maxCoeff();
  return mx.array() + ((logits.colwise() - mx).array().exp().rowwise().sum()).log();
}

}  // namespace detail

// He-normal weights, zero biases and moments.
inline ModelState init_model(const ModelConfig& config) {
  config.validate();
  ModelState s;
  Rng rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int L = config.n_layers();
  for (int l = 0; l < L; ++l) {
    const int fan_in = config.layer_widths[l];
    const int fan_out = config.layer_widths[l + 1];
    const double scale = std::sqrt(2.0 / fan_in);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * gauss(rng);
    s.weights.push_back(w);
    s.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    s.adam_m_w.push_back(Eigen::MatrixXd::Zero(fan_out, fan_in));
    s.adam_v_w.push_back(Eigen::MatrixXd::Zero(fan_out, fan_in));
    s.adam_m_b.push_back(Eigen::VectorXd::Zero(fan_out));
    s.adam_v_b.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return s;
}

inline EmaState init_ema(const ModelState& state, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("EMA alpha must lie in [0,1]");
  return EmaState{state.weights, state.biases, alpha};
}

inline PredictionBatch forward(const ModelState& state, const ModelConfig& config,
                               const Eigen::MatrixXd& x, DropoutMode dropout = DropoutMode::off()) {
  detail::check_state_shapes(state, config);
  auto t = detail::forward_trace(state.weights, state.biases, config, x, dropout);
  PredictionBatch out;
  out.probs = detail::softmax_rows(t.post.back());
  out.hidden = t.post[t.post.size() - 2];
  return out;
}

inline PredictionBatch forward(const EmaState& ema, const ModelConfig& config,
                               const Eigen::MatrixXd& x, DropoutMode dropout = DropoutMode::off()) {
  auto t = detail::forward_trace(ema.weights, ema.biases, config, x, dropout);
  PredictionBatch out;
  out.probs = detail::softmax_rows(t.post.back());
  out.hidden = t.post[t.post.size() - 2];
  return out;
}

// Per-example cross-entropy from probabilities; probabilities are clamped at
// 1e-12 before the log.
inline Eigen::VectorXd cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& y) {
  if (static_cast<Eigen::Index>(y.size()) != probs.rows())
    throw DimensionError("cross_entropy: label count does not match rows");
  Eigen::VectorXd out(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (y[i] < 0 || y[i] >= probs.cols()) throw InputError("cross_entropy: label out of range");
    out[i] = -std::log(std::max(probs(i, y[i]), 1e-12));
  }
  return out;
}

// Mean (or weight-averaged) cross-entropy and its gradients. With weights w
// the objective is (1/n) * sum_i w_i * loss_i.
inline std::pair<double, Gradients> weighted_loss_and_grads(const ModelState& state,
                                                            const ModelConfig& config,
                                                            const Eigen::MatrixXd& x,
                                                            const std::vector<int>& y,
                                                            const Eigen::VectorXd& w) {
  detail::check_state_shapes(state, config);
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw DimensionError("loss_and_grads: label count does not match rows");
  if (w.size() != x.rows()) throw DimensionError("loss_and_grads: weight count does not match rows");
  const int C = config.n_classes();
  for (int label : y)
    if (label < 0 || label >= C) throw InputError("loss_and_grads: label out of range");

  auto t = detail::forward_trace(state.weights, state.biases, config, x, DropoutMode::off());
  const Eigen::MatrixXd& logits = t.post.back();
  const Eigen::Index n = x.rows();
  const int L = config.n_layers();

  // Loss via log-sum-exp.
  Eigen::VectorXd lse = detail::logsumexp_rows(logits);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) loss += w[i] * (lse[i] - logits(i, y[i]));
  loss /= static_cast<double>(n);

  // Backward pass.
  Eigen::MatrixXd delta = detail::softmax_rows(logits);
  for (Eigen::Index i = 0; i < n; ++i) {
    delta(i, y[i]) -= 1.0;
    delta.row(i) *= w[i] / static_cast<double>(n);
  }

  Gradients g;
  g.weights.resize(L);
  g.biases.resize(L);
  for (int l = L - 1; l >= 0; --l) {
    g.weights[l] = delta.transpose() * t.post[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd da = delta * state.weights[l];
      delta = da.array() * (t.pre[l - 1].array() > 0.0).cast<double>();
    }
  }
  return {loss, std::move(g)};
}

inline std::pair<double, Gradients> loss_and_grads(const ModelState& state,
                                                   const ModelConfig& config,
                                                   const Eigen::MatrixXd& x,
                                                   const std::vector<int>& y) {
  return weighted_loss_and_grads(state, config, x, y, Eigen::VectorXd::Ones(x.rows()));
}

// Bias-corrected Adam update; increments step_count.
inline void adam_step(ModelState& state, const Gradients& grads, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  const int L = static_cast<int>(state.weights.size());
  if (static_cast<int>(grads.weights.size()) != L || static_cast<int>(grads.biases.size()) != L)
    throw DimensionError("adam_step: gradient layer count mismatch");
  for (int l = 0; l < L; ++l)
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite())
      throw NumericError("adam_step: non-finite gradients");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);

  for (int l = 0; l < L; ++l) {
    state.adam_m_w[l] = beta1 * state.adam_m_w[l] + (1.0 - beta1) * grads.weights[l];
    state.adam_v_w[l] =
        beta2 * state.adam_v_w[l].array() + (1.0 - beta2) * grads.weights[l].array().square();
    state.weights[l].array() -=
        lr * (state.adam_m_w[l].array() / c1) / ((state.adam_v_w[l].array() / c2).sqrt() + eps);

    state.adam_m_b[l] = beta1 * state.adam_m_b[l] + (1.0 - beta1) * grads.biases[l];
    state.adam_v_b[l] =
        beta2 * state.adam_v_b[l].array() + (1.0 - beta2) * grads.biases[l].array().square();
    state.biases[l].array() -=
        lr * (state.adam_m_b[l].array() / c1) / ((state.adam_v_b[l].array() / c2).sqrt() + eps);
  }
}

inline void ema_update(EmaState& ema, const ModelState& state) {
  if (ema.weights.size() != state.weights.size())
    throw DimensionError("ema_update: layer count mismatch");
  for (std::size_t l = 0; l < ema.weights.size(); ++l) {
    if (ema.weights[l].rows() != state.weights[l].rows() ||
        ema.weights[l].cols() != state.weights[l].cols())
      throw DimensionError("ema_update: weight shape mismatch");
    ema.weights[l] = ema.alpha * ema.weights[l] + (1.0 - ema.alpha) * state.weights[l];
    ema.biases[l] = ema.alpha * ema.biases[l] + (1.0 - ema.alpha) * state.biases[l];
  }
}

// Shuffled minibatch training with Adam; the EMA shadow is refreshed once per
// epoch. Returns one mean training loss per epoch.
inline std::vector<double> train(ModelState& state, EmaState& ema, const ModelConfig& config,
                                 const Eigen::MatrixXd& x, const std::vector<int>& y, int epochs,
                                 int batch_size, double lr, Rng& rng) {
  if (x.rows() == 0) throw PreconditionError("train: empty labeled set");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  const Eigen::Index n = x.rows();

  std::vector<double> trace;
  trace.reserve(epochs);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - start);
      Eigen::MatrixXd xb(count, x.cols());
      std::vector<int> yb(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        xb.row(i) = x.row(order[start + i]);
        yb[i] = y[order[start + i]];
      }
      auto [loss, grads] = loss_and_grads(state, config, xb, yb);
      adam_step(state, grads, lr);
      epoch_loss += loss * static_cast<double>(count);
    }
    ema_update(ema, state);
    trace.push_back(epoch_loss / static_cast<double>(n));
  }
  return trace;
}

// Fraction of rows whose argmax probability matches the label.
inline double accuracy(const ModelState& state, const ModelConfig& config, const Eigen::MatrixXd& x,
                       const std::vector<int>& y) {
  auto pred = forward(state, config, x);
  int hits = 0;
  for (Eigen::Index i = 0; i < pred.probs.rows(); ++i) {
    Eigen::Index c;
    pred.probs.row(i).maxCoeff(&c);
    if (static_cast<int>(c) == y[i]) ++hits;
  }
  return x.rows() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(x.rows());
}

}  // namespace hetal
