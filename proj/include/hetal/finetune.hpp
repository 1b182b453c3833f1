#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <utility>
#include <vector>

#include "hetal/common.hpp"
#include "hetal/nn.hpp"

namespace hetal {

enum class AugmentFamily { tabular, image };

// Perturbation policy for pseudo-label fine-tuning. Parameters at zero make
// the corresponding op the identity.
struct AugmentSpec {
  AugmentFamily family = AugmentFamily::tabular;
  double jitter_sigma = 0.1;         // both families
  double feature_dropout_rate = 0.0;  // tabular
  double channel_scale_range = 0.0;   // image: per-block scale in [1-r, 1+r]
  double cutout_fraction = 0.0;       // image: zero a contiguous block
  int ops_per_example = 1;

  void validate() const {
    if (jitter_sigma < 0.0) throw ConfigError("AugmentSpec: jitter_sigma must be >= 0");
    if (feature_dropout_rate < 0.0 || feature_dropout_rate >= 1.0)
      throw ConfigError("AugmentSpec: feature_dropout_rate must lie in [0,1)");
    if (channel_scale_range < 0.0 || channel_scale_range >= 1.0)
      throw ConfigError("AugmentSpec: channel_scale_range must lie in [0,1)");
    if (cutout_fraction < 0.0 || cutout_fraction >= 1.0)
      throw ConfigError("AugmentSpec: cutout_fraction must lie in [0,1)");
    if (ops_per_example < 1) throw ConfigError("AugmentSpec: ops_per_example must be >= 1");
  }
};

struct FinetuneConfig {
  double confidence_threshold = 0.8;
  int ft_epochs = 100;
  double ft_lr = 1e-3;
  int batch_size = 64;
  AugmentSpec augment;
  std::uint64_t seed = 0;

  void validate() const {
    if (confidence_threshold <= 0.0 || confidence_threshold >= 1.0)
      throw ConfigError("FinetuneConfig: threshold must lie in (0,1)");
    if (ft_lr <= 0.0) throw ConfigError("FinetuneConfig: ft_lr must be > 0");
    if (ft_epochs < 0) throw ConfigError("FinetuneConfig: ft_epochs must be >= 0");
    augment.validate();
  }
};

// Rows whose top probability reaches the threshold, with the argmax class as
// pseudo-label. An empty result is valid.
inline std::pair<std::vector<int>, std::vector<int>> select_confident(const Eigen::MatrixXd& probs,
                                                                      double threshold) {
  std::vector<int> idx, pseudo;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index c;
    const double top = probs.row(i).maxCoeff(&c);
    if (top >= threshold) {
      idx.push_back(static_cast<int>(i));
      pseudo.push_back(static_cast<int>(c));
    }
  }
  return {std::move(idx), std::move(pseudo)};
}

namespace detail {

enum class AugOp { jitter, feature_dropout, channel_scale, cutout };

// Ops of the family whose parameter is nonzero; everything else is identity.
inline std::vector<AugOp> enabled_ops(const AugmentSpec& spec) {
  std::vector<AugOp> ops;
  if (spec.jitter_sigma > 0.0) ops.push_back(AugOp::jitter);
  if (spec.family == AugmentFamily::tabular) {
    if (spec.feature_dropout_rate > 0.0) ops.push_back(AugOp::feature_dropout);
  } else {
    if (spec.channel_scale_range > 0.0) ops.push_back(AugOp::channel_scale);
    if (spec.cutout_fraction > 0.0) ops.push_back(AugOp::cutout);
  }
  return ops;
}

inline void apply_op(AugOp op, Eigen::Ref<Eigen::RowVectorXd> row, const AugmentSpec& spec,
                     Rng& rng) {
  const int d = static_cast<int>(row.size());
  switch (op) {
    case AugOp::jitter: {
      std::normal_distribution<double> g(0.0, spec.jitter_sigma);
      for (int j = 0; j < d; ++j) row[j] += g(rng);
      break;
    }
    case AugOp::feature_dropout: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int j = 0; j < d; ++j)
        if (unit(rng) < spec.feature_dropout_rate) row[j] = 0.0;
      break;
    }
    case AugOp::channel_scale: {
      const int n_blocks = (d % 3 == 0) ? 3 : 1;
      const int block = d / n_blocks;
      std::uniform_real_distribution<double> scale(1.0 - spec.channel_scale_range,
                                                   1.0 + spec.channel_scale_range);
      for (int b = 0; b < n_blocks; ++b) {
        const double s = scale(rng);
        for (int j = b * block; j < (b + 1) * block; ++j) row[j] *= s;
      }
      break;
    }
    case AugOp::cutout: {
      const int len = static_cast<int>(spec.cutout_fraction * d);
      if (len <= 0) break;
      std::uniform_int_distribution<int> start(0, d - len);
      const int s = start(rng);
      for (int j = s; j < s + len; ++j) row[j] = 0.0;
      break;
    }
  }
}

}  // namespace detail

// Applies up to ops_per_example distinct enabled ops to each row, chosen at
// random per example. With no enabled ops this is the identity.
inline Eigen::MatrixXd augment(const Eigen::MatrixXd& x, const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<detail::AugOp> ops = detail::enabled_ops(spec);
  Eigen::MatrixXd out = x;
  if (ops.empty()) return out;
  const int apply = std::min<int>(spec.ops_per_example, static_cast<int>(ops.size()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (int j = 0; j < apply; ++j) {
      std::uniform_int_distribution<int> pick(j, static_cast<int>(ops.size()) - 1);
      std::swap(ops[j], ops[pick(rng)]);
    }
    Eigen::RowVectorXd row = out.row(i);
    for (int j = 0; j < apply; ++j) detail::apply_op(ops[j], row, spec, rng);
    out.row(i) = row;
  }
  return out;
}

// Confidence-thresholded pseudo-label fine-tuning: pick the unlabeled rows
// the model is confident on, train on augmented copies against the predicted
// labels. Sees only the unlabeled feature matrix, never pool labels.
// Returns the number of examples fine-tuned on (0 = state untouched).
inline int finetune(ModelState& state, EmaState& ema, const ModelConfig& config,
                    const Eigen::MatrixXd& x_unlabeled, const FinetuneConfig& ft) {
  ft.validate();
  if (x_unlabeled.rows() == 0 || ft.ft_epochs == 0) return 0;

  auto probs = forward(state, config, x_unlabeled).probs;
  auto [idx, pseudo] = select_confident(probs, ft.confidence_threshold);
  if (idx.empty()) return 0;

  Eigen::MatrixXd x_conf(static_cast<Eigen::Index>(idx.size()), x_unlabeled.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    x_conf.row(static_cast<Eigen::Index>(i)) = x_unlabeled.row(idx[i]);

  Rng aug_rng(derive_seed(ft.seed, 0x617567));
  Eigen::MatrixXd x_aug = augment(x_conf, ft.augment, aug_rng);

  Rng train_rng(derive_seed(ft.seed, 0x747261));
  train(state, ema, config, x_aug, pseudo, ft.ft_epochs, ft.batch_size, ft.ft_lr, train_rng);
  return static_cast<int>(idx.size());
}

}  // namespace hetal
