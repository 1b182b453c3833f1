#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "hetal/common.hpp"
#include "hetal/data.hpp"
#include "hetal/nn.hpp"

namespace hetal {

enum class Strategy { rand, conf, marg, bald, coreset, badge, lhd };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::rand: return "rand";
    case Strategy::conf: return "conf";
    case Strategy::marg: return "marg";
    case Strategy::bald: return "bald";
    case Strategy::coreset: return "coreset";
    case Strategy::badge: return "badge";
    case Strategy::lhd: return "lhd";
  }
  return "?";
}

inline Strategy strategy_from_string(const std::string& name) {
  for (Strategy s : {Strategy::rand, Strategy::conf, Strategy::marg, Strategy::bald,
                     Strategy::coreset, Strategy::badge, Strategy::lhd})
    if (name == to_string(s)) return s;
  throw ConfigError("unknown strategy: " + name);
}

struct AcquisitionRequest {
  Strategy strategy = Strategy::rand;
  int k = 1;
  std::uint64_t seed = 0;
  int bald_passes = 10;
};

// Per-example main-vs-EMA differences driving lhd selection.
struct StateDifference {
  Eigen::VectorXd delta_l;  // |l_ema - l_main|, >= 0
  Eigen::MatrixXd delta_h;  // h_ema - h_main, one row per example
  Eigen::MatrixXd lh;       // delta_l * delta_h, row-scaled
};

namespace detail {

// Indices of the k smallest scores, ties broken by lower index.
inline std::vector<int> bottom_k(const Eigen::VectorXd& scores, int k) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] < scores[b]; });
  idx.resize(k);
  return idx;
}

inline std::vector<int> top_k(const Eigen::VectorXd& scores, int k) {
  return bottom_k(-scores, k);
}

inline double shannon_entropy(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return h;
}

}  // namespace detail

// k distinct indices from {0..n-1}, uniform without replacement.
inline std::vector<int> select_random(int n, int k, Rng& rng) {
  if (k < 0 || k > n) throw InputError("select_random: k out of range");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

// Least-confidence sampling: the k rows whose top class probability is
// smallest.
inline std::vector<int> select_conf(const Eigen::MatrixXd& probs, int k) {
  if (k < 0 || k > probs.rows()) throw InputError("select_conf: k out of range");
  Eigen::VectorXd score = probs.rowwise().maxCoeff();
  return detail::bottom_k(score, k);
}

// Margin sampling: smallest gap between the two most likely classes.
inline std::vector<int> select_margin(const Eigen::MatrixXd& probs, int k) {
  if (k < 0 || k > probs.rows()) throw InputError("select_margin: k out of range");
  if (probs.cols() < 2) throw InputError("select_margin: need at least 2 classes");
  Eigen::VectorXd score(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double first = -1.0, second = -1.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double p = probs(i, c);
      if (p > first) {
        second = first;
        first = p;
      } else if (p > second) {
        second = p;
      }
    }
    score[i] = first - second;
  }
  return detail::bottom_k(score, k);
}

// Mutual-information scores from a stack of stochastic forward passes:
// H(mean of passes) - mean(H of each pass).
inline Eigen::VectorXd bald_scores(const std::vector<Eigen::MatrixXd>& pass_probs) {
  if (pass_probs.size() < 2) throw InputError("bald_scores: need at least 2 passes");
  const Eigen::Index n = pass_probs.front().rows();
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, pass_probs.front().cols());
  for (const auto& p : pass_probs) {
    if (p.rows() != n || p.cols() != mean.cols())
      throw DimensionError("bald_scores: pass shapes disagree");
    mean += p;
  }
  mean /= static_cast<double>(pass_probs.size());

  Eigen::VectorXd scores(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double expected = 0.0;
    for (const auto& p : pass_probs) expected += detail::shannon_entropy(p.row(i));
    expected /= static_cast<double>(pass_probs.size());
    scores[i] = detail::shannon_entropy(mean.row(i)) - expected;
  }
  return scores;
}

inline std::vector<int> select_bald(const ModelState& state, const ModelConfig& config,
                                    const Eigen::MatrixXd& x, int k, int passes, Rng& rng) {
  if (config.dropout_rate <= 0.0)
    throw ConfigError("select_bald: dropout must be enabled");
  if (passes < 2) throw ConfigError("select_bald: need at least 2 passes");
  if (k < 0 || k > x.rows()) throw InputError("select_bald: k out of range");

  std::vector<Eigen::MatrixXd> pass_probs;
  pass_probs.reserve(passes);
  for (int t = 0; t < passes; ++t)
    pass_probs.push_back(
        forward(state, config, x, DropoutMode::stochastic_seeded(rng())).probs);
  return detail::top_k(bald_scores(pass_probs), k);
}

// Farthest-point (k-center) greedy over embeddings: repeatedly add the
// unlabeled point with the greatest distance to its nearest neighbor among
// the labeled set plus everything selected so far.
inline std::vector<int> kcenter_greedy(const Eigen::MatrixXd& unlabeled_emb,
                                       const Eigen::MatrixXd& labeled_emb, int k) {
  const Eigen::Index n = unlabeled_emb.rows();
  if (k < 0 || k > n) throw InputError("kcenter_greedy: k out of range");

  Eigen::VectorXd min_sq(n);
  if (labeled_emb.rows() == 0) {
    min_sq.setConstant(std::numeric_limits<double>::infinity());
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      min_sq[i] = (labeled_emb.rowwise() - unlabeled_emb.row(i)).rowwise().squaredNorm().minCoeff();
  }

  std::vector<int> selected;
  selected.reserve(k);
  std::vector<std::uint8_t> used(n, 0);
  for (int step = 0; step < k; ++step) {
    int best = -1;
    double best_d = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[i]) continue;
      if (min_sq[i] > best_d) {  // strict: ties go to the lower index
        best_d = min_sq[i];
        best = static_cast<int>(i);
      }
    }
    // With an empty labeled set everything is at infinity, so the first
    // pick falls to index 0 by the tie rule.
    selected.push_back(best);
    used[best] = 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[i]) continue;
      const double d = (unlabeled_emb.row(i) - unlabeled_emb.row(best)).squaredNorm();
      min_sq[i] = std::min(min_sq[i], d);
    }
  }
  return selected;
}

// k-means++ seeding (D^2 sampling): first center uniform, each subsequent
// center drawn with probability proportional to squared distance to the
// nearest chosen center. If every remaining point sits on a chosen center,
// falls back to uniform over the unchosen.
inline std::vector<int> kmeanspp_seed(const Eigen::MatrixXd& vectors, int k, Rng& rng) {
  const Eigen::Index n = vectors.rows();
  if (k < 0 || k > n) throw InputError("kmeanspp_seed: k out of range");
  if (k == 0) return {};

  std::vector<int> centers;
  centers.reserve(k);
  std::vector<std::uint8_t> chosen(n, 0);

  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  const int c0 = static_cast<int>(first(rng));
  centers.push_back(c0);
  chosen[c0] = 1;

  Eigen::VectorXd min_sq(n);
  for (Eigen::Index i = 0; i < n; ++i) min_sq[i] = (vectors.row(i) - vectors.row(c0)).squaredNorm();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!chosen[i]) total += min_sq[i];

    int next = -1;
    if (total > 0.0) {
      const double u = unit(rng) * total;
      double cum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        cum += min_sq[i];
        if (cum > u) {
          next = static_cast<int>(i);
          break;
        }
      }
      if (next < 0) {  // float round-off at the tail
        for (Eigen::Index i = n - 1; i >= 0; --i)
          if (!chosen[i] && min_sq[i] > 0.0) {
            next = static_cast<int>(i);
            break;
          }
      }
    } else {
      // Degenerate: all remaining distances are zero.
      std::vector<int> open;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!chosen[i]) open.push_back(static_cast<int>(i));
      std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
      next = open[pick(rng)];
    }

    centers.push_back(next);
    chosen[next] = 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      min_sq[i] = std::min(min_sq[i], (vectors.row(i) - vectors.row(next)).squaredNorm());
    }
  }
  return centers;
}

// Hallucinated-gradient embedding: the exact output-layer cross-entropy
// gradient assuming the predicted class is the label. Layout matches the
// flattened output weight matrix: class-major blocks of hidden features.
inline Eigen::MatrixXd badge_embeddings(const Eigen::MatrixXd& probs,
                                        const Eigen::MatrixXd& hidden) {
  if (probs.rows() != hidden.rows()) throw DimensionError("badge_embeddings: row count mismatch");
  const Eigen::Index n = probs.rows(), C = probs.cols(), dh = hidden.cols();
  Eigen::MatrixXd emb(n, C * dh);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index yhat;
    probs.row(i).maxCoeff(&yhat);
    for (Eigen::Index c = 0; c < C; ++c) {
      const double resid = probs(i, c) - (c == yhat ? 1.0 : 0.0);
      emb.row(i).segment(c * dh, dh) = resid * hidden.row(i);
    }
  }
  return emb;
}

inline std::vector<int> select_badge(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& hidden,
                                     int k, Rng& rng) {
  return kmeanspp_seed(badge_embeddings(probs, hidden), k, rng);
}

// Main-vs-EMA state difference on unlabeled examples. The EMA prediction
// supplies the pseudo-label for both loss terms.
inline StateDifference lhd_state_difference(const ModelState& main, const EmaState& ema,
                                            const ModelConfig& config, const Eigen::MatrixXd& x) {
  auto pred_main = forward(main, config, x);
  auto pred_ema = forward(ema, config, x);

  const Eigen::Index n = x.rows();
  std::vector<int> pseudo(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index c;
    pred_ema.probs.row(i).maxCoeff(&c);
    pseudo[i] = static_cast<int>(c);
  }

  Eigen::VectorXd l_main = cross_entropy(pred_main.probs, pseudo);
  Eigen::VectorXd l_ema = cross_entropy(pred_ema.probs, pseudo);

  StateDifference diff;
  diff.delta_l = (l_ema - l_main).cwiseAbs();
  diff.delta_h = pred_ema.hidden - pred_main.hidden;
  diff.lh = diff.delta_h.array().colwise() * diff.delta_l.array();
  return diff;
}

inline std::vector<int> select_lhd(const ModelState& main, const EmaState& ema,
                                   const ModelConfig& config, const Eigen::MatrixXd& x, int k,
                                   Rng& rng) {
  return kmeanspp_seed(lhd_state_difference(main, ema, config, x).lh, k, rng);
}

// Runs the requested strategy against a pool view and maps positions back to
// pool indices.
inline std::vector<int> acquire(const AcquisitionRequest& request, const PoolView& view,
                                const ModelState& state, const EmaState& ema,
                                const ModelConfig& config) {
  const int m = static_cast<int>(view.unlabeled.size());
  if (request.k > m) throw InputError("acquire: k exceeds unlabeled pool");
  Rng rng(request.seed);

  std::vector<int> positions;
  switch (request.strategy) {
    case Strategy::rand:
      positions = select_random(m, request.k, rng);
      break;
    case Strategy::conf:
      positions = select_conf(forward(state, config, view.unlabeled_features()).probs, request.k);
      break;
    case Strategy::marg:
      positions = select_margin(forward(state, config, view.unlabeled_features()).probs, request.k);
      break;
    case Strategy::bald:
      positions =
          select_bald(state, config, view.unlabeled_features(), request.k, request.bald_passes, rng);
      break;
    case Strategy::coreset: {
      auto unl = forward(state, config, view.unlabeled_features()).hidden;
      Eigen::MatrixXd lab(0, unl.cols());
      if (!view.labeled.empty()) lab = forward(state, config, view.labeled_features()).hidden;
      positions = kcenter_greedy(unl, lab, request.k);
      break;
    }
    case Strategy::badge: {
      auto pred = forward(state, config, view.unlabeled_features());
      positions = select_badge(pred.probs, pred.hidden, request.k, rng);
      break;
    }
    case Strategy::lhd:
      positions = select_lhd(state, ema, config, view.unlabeled_features(), request.k, rng);
      break;
  }

  std::vector<int> indices;
  indices.reserve(positions.size());
  for (int p : positions) indices.push_back(view.unlabeled[p]);
  return indices;
}

}  // namespace hetal
