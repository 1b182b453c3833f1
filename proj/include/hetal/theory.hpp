#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hetal/common.hpp"
#include "hetal/nn.hpp"

namespace hetal {

namespace detail {

// Binomial coefficient as a double; exact via long-double products for small
// arguments, log-gamma beyond.
inline double choose(int a, int b) {
  if (b < 0 || b > a) return 0.0;
  b = std::min(b, a - b);
  if (a <= 60) {
    long double r = 1.0L;
    for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return static_cast<double>(r);
  }
  return std::exp(std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0));
}

}  // namespace detail

// gamma[j-1] = probability that the population rank-j example lands in a
// uniform size-s minibatch and falls within its top q losses:
//   sum_i C(j-1, i) * C(n-j, s-1-i) / C(n, s)   over i = 0 .. q-1.
inline std::vector<double> gamma_weights(int n, int s, int q) {
  if (!(1 <= q && q <= s && s <= n)) throw InputError("gamma_weights: need 1 <= q <= s <= n");
  const double denom = detail::choose(n, s);
  std::vector<double> gamma(n);
  for (int j = 1; j <= n; ++j) {
    double sum = 0.0;
    for (int i = 0; i <= std::min(q - 1, j - 1); ++i)
      sum += detail::choose(j - 1, i) * detail::choose(n - j, s - 1 - i);
    gamma[j - 1] = sum / denom;
  }
  return gamma;
}

struct TopQSpec {
  int n = 0, s = 0, q = 0;
  std::vector<double> gamma;

  static TopQSpec make(int n, int s, int q) { return TopQSpec{n, s, q, gamma_weights(n, s, q)}; }
};

// Permutation putting losses in decreasing order; ties stay in original
// index order.
inline std::vector<int> loss_order_desc(const Eigen::VectorXd& losses) {
  std::vector<int> order(losses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return losses[a] > losses[b]; });
  return order;
}

// L_q = (1/q) * sum_j gamma_j * L_(j), losses ordered decreasing.
inline double topq_loss(const Eigen::VectorXd& losses, const TopQSpec& spec) {
  if (losses.size() != spec.n) throw InputError("topq_loss: size mismatch with spec");
  const auto order = loss_order_desc(losses);
  double acc = 0.0;
  for (int j = 0; j < spec.n; ++j) acc += spec.gamma[j] * losses[order[j]];
  return acc / spec.q;
}

// Per-original-index weights r_i: gamma permuted by the loss order, so that
// sum_i r_i * L_i = sum_j gamma_j * L_(j).
inline Eigen::VectorXd r_weights(const Eigen::VectorXd& losses, const TopQSpec& spec) {
  if (losses.size() != spec.n) throw InputError("r_weights: size mismatch with spec");
  const auto order = loss_order_desc(losses);
  Eigen::VectorXd r(spec.n);
  for (int j = 0; j < spec.n; ++j) r[order[j]] = spec.gamma[j];
  return r;
}

// Fixed per-index corruption maps. relabel_to[i] = -1 keeps the label; the
// optional feature hook rewrites row i in place.
struct CorruptionSpec {
  std::vector<int> relabel_to;
  std::function<void(int, Eigen::Ref<Eigen::RowVectorXd>)> feature_map;

  static CorruptionSpec identity(int n) { return CorruptionSpec{std::vector<int>(n, -1), nullptr}; }

  static CorruptionSpec uniform_relabel(int n, const std::vector<int>& subset, int n_classes,
                                        std::uint64_t seed) {
    CorruptionSpec spec{std::vector<int>(n, -1), nullptr};
    Rng rng(seed);
    std::uniform_int_distribution<int> pick(0, n_classes - 1);
    for (int i : subset) {
      if (i < 0 || i >= n) throw InputError("uniform_relabel: index out of range");
      spec.relabel_to[i] = pick(rng);
    }
    return spec;
  }

  bool is_identity() const {
    if (feature_map) return false;
    return std::all_of(relabel_to.begin(), relabel_to.end(), [](int v) { return v < 0; });
  }

  void apply(Eigen::MatrixXd& x, std::vector<int>& y) const {
    if (static_cast<Eigen::Index>(relabel_to.size()) != x.rows())
      throw DimensionError("CorruptionSpec: size mismatch");
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (relabel_to[i] >= 0) y[i] = relabel_to[i];
      if (feature_map) {
        Eigen::RowVectorXd row = x.row(i);
        feature_map(static_cast<int>(i), row);
        x.row(i) = row;
      }
    }
  }
};

// Draws a fresh dataset of fixed size: sampler(seed, x, y).
using DatasetSampler = std::function<void(std::uint64_t, Eigen::MatrixXd&, std::vector<int>&)>;

// Gaussian blobs, one isotropic mode per class, for the small theory
// experiments.
inline DatasetSampler gaussian_blob_sampler(int n, int d, int n_classes, double spread,
                                            double sigma) {
  return [=](std::uint64_t seed, Eigen::MatrixXd& x, std::vector<int>& y) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    std::uniform_int_distribution<int> cls(0, n_classes - 1);
    x.resize(n, d);
    y.resize(n);
    for (int i = 0; i < n; ++i) {
      const int c = cls(rng);
      y[i] = c;
      const double angle = 2.0 * 3.14159265358979323846 * c / n_classes;
      for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        if (j == 0) mean = spread * std::cos(angle);
        if (j == 1) mean = spread * std::sin(angle);
        x(i, j) = mean + g(rng);
      }
    }
  };
}

// Model family for the top-q-biased factor: an architecture with a Frobenius
// cap per layer (applied to weights and biases), explored by multi-restart
// projected gradient descent. The first restart starts from zero parameters
// (where every cross-entropy loss ties), the rest from random draws. A
// fixed_point collapses the family to a single parameter vector (no
// optimization).
struct ThetaSpec {
  ModelConfig config;
  std::vector<double> norm_caps;
  int restarts = 5;
  int steps = 500;
  double lr = 0.05;
  std::optional<ModelState> fixed_point;

  void validate() const {
    config.validate();
    if (!fixed_point) {
      if (static_cast<int>(norm_caps.size()) != config.n_layers())
        throw ConfigError("ThetaSpec: need one norm cap per layer");
      for (double c : norm_caps)
        if (c <= 0.0) throw ConfigError("ThetaSpec: norm caps must be > 0");
      if (restarts < 1 || steps < 0) throw ConfigError("ThetaSpec: bad optimization budget");
    }
  }
};

struct QEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  int trials_used = 0;
  int flagged = 0;  // trials dropped for non-finite inner objectives
  std::vector<double> per_trial;
};

namespace detail {

inline void project_caps(ModelState& state, const std::vector<double>& caps) {
  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    const double wn = state.weights[l].norm();
    if (wn > caps[l]) state.weights[l] *= caps[l] / wn;
    const double bn = state.biases[l].norm();
    if (bn > caps[l]) state.biases[l] *= caps[l] / bn;
  }
}

// Objective of the top-q-biased factor at a fixed parameter point:
//   (1/n) * sum_i [ (r_i * n / q) * loss_corrupted_i - loss_clean_i ].
inline double q_objective(const ModelState& state, const ModelConfig& config,
                          const Eigen::MatrixXd& x_clean, const std::vector<int>& y_clean,
                          const Eigen::MatrixXd& x_corr, const std::vector<int>& y_corr,
                          const TopQSpec& spec, Eigen::VectorXd* weights_out = nullptr) {
  auto pred_c = forward(state, config, x_corr);
  Eigen::VectorXd losses_corr = cross_entropy(pred_c.probs, y_corr);
  Eigen::VectorXd r = r_weights(losses_corr, spec);
  Eigen::VectorXd w = r * (static_cast<double>(spec.n) / spec.q);
  if (weights_out) *weights_out = w;

  auto pred_clean = forward(state, config, x_clean);
  Eigen::VectorXd losses_clean = cross_entropy(pred_clean.probs, y_clean);

  double acc = 0.0;
  for (int i = 0; i < spec.n; ++i) acc += w[i] * losses_corr[i] - losses_clean[i];
  return acc / spec.n;
}

}  // namespace detail

// Monte-Carlo estimate of the top-q-biased factor: over sampled datasets,
// approximate the infimum of the q_objective by multi-restart projected
// gradient descent (an upper bound on the true infimum contribution).
inline QEstimate estimate_Q(const ThetaSpec& theta, const DatasetSampler& sampler,
                            const CorruptionSpec& corruption, const TopQSpec& spec, int trials,
                            std::uint64_t seed) {
  theta.validate();
  if (trials < 2) throw InputError("estimate_Q: need at least 2 trials");

  QEstimate out;
  for (int trial = 0; trial < trials; ++trial) {
    Eigen::MatrixXd x;
    std::vector<int> y;
    sampler(derive_seed(seed, 0xd5, trial), x, y);
    if (x.rows() != spec.n) throw DimensionError("estimate_Q: sampler size != spec.n");
    Eigen::MatrixXd x_corr = x;
    std::vector<int> y_corr = y;
    corruption.apply(x_corr, y_corr);

    double best = std::numeric_limits<double>::infinity();
    const int restarts = theta.fixed_point ? 1 : theta.restarts;
    for (int r = 0; r < restarts; ++r) {
      ModelState state;
      if (theta.fixed_point) {
        state = *theta.fixed_point;
      } else {
        ModelConfig cfg = theta.config;
        cfg.seed = derive_seed(seed, 0x72, trial * 1000 + r);
        state = init_model(cfg);
        if (r == 0)
          for (auto& w : state.weights) w.setZero();
        detail::project_caps(state, theta.norm_caps);
      }

      const int steps = theta.fixed_point ? 0 : theta.steps;
      double val =
          detail::q_objective(state, theta.config, x, y, x_corr, y_corr, spec);
      if (std::isfinite(val)) best = std::min(best, val);

      for (int step = 0; step < steps; ++step) {
        Eigen::VectorXd w;
        detail::q_objective(state, theta.config, x, y, x_corr, y_corr, spec, &w);
        auto [lc, gc] = weighted_loss_and_grads(state, theta.config, x_corr, y_corr, w);
        auto [ll, gl] = loss_and_grads(state, theta.config, x, y);
        for (std::size_t l = 0; l < state.weights.size(); ++l) {
          state.weights[l] -= theta.lr * (gc.weights[l] - gl.weights[l]);
          state.biases[l] -= theta.lr * (gc.biases[l] - gl.biases[l]);
        }
        detail::project_caps(state, theta.norm_caps);
        val = detail::q_objective(state, theta.config, x, y, x_corr, y_corr, spec);
        if (std::isfinite(val)) best = std::min(best, val);
      }
    }

    if (std::isfinite(best))
      out.per_trial.push_back(best);
    else
      ++out.flagged;
  }

  out.trials_used = static_cast<int>(out.per_trial.size());
  if (out.trials_used < 2) throw NumericError("estimate_Q: too few usable trials");
  double mean = 0.0;
  for (double v : out.per_trial) mean += v;
  mean /= out.trials_used;
  double var = 0.0;
  for (double v : out.per_trial) var += (v - mean) * (v - mean);
  var /= (out.trials_used - 1);
  out.estimate = mean;
  out.std_error = std::sqrt(var / out.trials_used);
  return out;
}

// Closed-form Rademacher bound for norm-capped feedforward nets with
// 1-Lipschitz positive-homogeneous activations:
//   B * (sqrt(2 ln(2) T) + 1) * prod(M_l) / sqrt(n).
inline double rademacher_bound(double input_bound, const std::vector<double>& layer_caps, int n) {
  if (input_bound <= 0.0) throw InputError("rademacher_bound: B must be > 0");
  if (n < 1) throw InputError("rademacher_bound: n must be >= 1");
  if (layer_caps.empty()) throw InputError("rademacher_bound: need at least one layer cap");
  double prod = 1.0;
  for (double m : layer_caps) {
    if (m <= 0.0) throw InputError("rademacher_bound: caps must be > 0");
    prod *= m;
  }
  const double T = static_cast<double>(layer_caps.size());
  return input_bound * (std::sqrt(2.0 * std::log(2.0) * T) + 1.0) * prod / std::sqrt(n);
}

enum class LossKind { cross_entropy, zero_one };

namespace detail {

inline Eigen::VectorXd eval_losses(const ModelState& state, const ModelConfig& config,
                                   const Eigen::MatrixXd& x, const std::vector<int>& y,
                                   LossKind kind) {
  auto pred = forward(state, config, x);
  if (kind == LossKind::cross_entropy) return cross_entropy(pred.probs, y);
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index c;
    pred.probs.row(i).maxCoeff(&c);
    out[i] = static_cast<int>(c) == y[i] ? 0.0 : 1.0;
  }
  return out;
}

}  // namespace detail

// Numeric instantiation of every term of the generalization bound
//   E[loss] <= L_q + 2*Rad + M(2 + s/q) sqrt(ln(2/delta) / 2n) - Q.
// Term values only; the inequality itself is not asserted anywhere (the
// closed-form capacity term is far too loose for that to be informative).
struct GapReport {
  double expected_loss = 0.0;    // left side, Monte-Carlo on the clean sampler
  double topq_train_loss = 0.0;  // L_q on the corrupted train set
  double rademacher_term = 0.0;  // 2 * closed-form bound with measured norms
  double confidence_term = 0.0;  // M (2 + s/q) sqrt(ln(2/delta) / 2n)
  double q_estimate = 0.0;
  double q_std_error = 0.0;
  double loss_range = 0.0;  // M
  double input_bound = 0.0;  // B
  double delta = 0.0;
  int n = 0, s = 0, q = 0;
  std::vector<double> q_trials;

  std::string table() const {
    std::ostringstream os;
    os << "generalization gap terms (n=" << n << ", s=" << s << ", q=" << q
       << ", delta=" << delta << ")\n";
    auto row = [&os](const char* name, double v) {
      os << "  " << name << " = " << v << "\n";
    };
    row("expected_loss   (lhs)", expected_loss);
    row("topq_train_loss (L_q)", topq_train_loss);
    row("rademacher_term (2R) ", rademacher_term);
    row("confidence_term      ", confidence_term);
    row("q_factor        (Q)  ", q_estimate);
    os << "  q_std_error          = " << q_std_error << "\n";
    os << "  rhs - lhs            = "
       << topq_train_loss + rademacher_term + confidence_term - q_estimate - expected_loss << "\n";
    return os.str();
  }
};

inline GapReport generalization_gap_report(const ModelState& model, const ModelConfig& config,
                                           const DatasetSampler& clean_sampler,
                                           const Eigen::MatrixXd& x_train,
                                           const std::vector<int>& y_train,
                                           const CorruptionSpec& corruption, const TopQSpec& spec,
                                           const ThetaSpec& theta, int q_trials, double delta,
                                           LossKind kind = LossKind::cross_entropy,
                                           std::uint64_t seed = 0) {
  if (delta <= 0.0 || delta > 1.0) throw InputError("gap report: delta must lie in (0,1]");
  GapReport rep;
  rep.delta = delta;
  rep.n = spec.n;
  rep.s = spec.s;
  rep.q = spec.q;

  Eigen::MatrixXd x_corr = x_train;
  std::vector<int> y_corr = y_train;
  corruption.apply(x_corr, y_corr);

  // Left side on a fresh sample from the clean distribution.
  Eigen::MatrixXd x_eval;
  std::vector<int> y_eval;
  clean_sampler(derive_seed(seed, 0xe7), x_eval, y_eval);
  Eigen::VectorXd eval_losses = detail::eval_losses(model, config, x_eval, y_eval, kind);
  rep.expected_loss = eval_losses.mean();

  Eigen::VectorXd train_losses = detail::eval_losses(model, config, x_corr, y_corr, kind);
  rep.topq_train_loss = topq_loss(train_losses, spec);

  rep.loss_range = kind == LossKind::zero_one
                       ? 1.0
                       : std::max(eval_losses.maxCoeff(), train_losses.maxCoeff());
  rep.input_bound = std::max(x_train.rowwise().norm().maxCoeff(),
                             x_eval.rowwise().norm().maxCoeff());

  std::vector<double> measured_caps;
  for (const auto& w : model.weights) measured_caps.push_back(std::max(w.norm(), 1e-12));
  rep.rademacher_term = 2.0 * rademacher_bound(rep.input_bound, measured_caps, spec.n);

  rep.confidence_term = rep.loss_range * (2.0 + static_cast<double>(spec.s) / spec.q) *
                        std::sqrt(std::log(2.0 / delta) / (2.0 * spec.n));

  QEstimate qe = estimate_Q(theta, clean_sampler, corruption, spec, q_trials, derive_seed(seed, 0x9));
  rep.q_estimate = qe.estimate;
  rep.q_std_error = qe.std_error;
  rep.q_trials = qe.per_trial;
  return rep;
}

}  // namespace hetal
