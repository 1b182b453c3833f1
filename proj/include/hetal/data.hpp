#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hetal/common.hpp"

namespace hetal {

// Full dataset with provenance flags and the labeled/unlabeled partition.
// Noise flags are bookkeeping for metrics only; selection strategies receive
// a PoolView, which cannot express them.
struct DataPool {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;
  std::vector<std::uint8_t> is_noisy;
  std::vector<int> labeled_idx;
  std::vector<int> unlabeled_idx;
  int n_classes = 0;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }

  void validate() const {
    const int n = size();
    if (static_cast<int>(labels.size()) != n || static_cast<int>(is_noisy.size()) != n)
      throw DimensionError("DataPool: field sizes disagree");
    for (int y : labels)
      if (y < 0 || y >= n_classes) throw InputError("DataPool: label out of range");
    std::vector<std::uint8_t> seen(n, 0);
    for (int i : labeled_idx) {
      if (i < 0 || i >= n || seen[i]) throw InputError("DataPool: bad labeled index set");
      seen[i] = 1;
    }
    for (int i : unlabeled_idx) {
      if (i < 0 || i >= n || seen[i]) throw InputError("DataPool: partition not disjoint");
      seen[i] = 1;
    }
    for (int i = 0; i < n; ++i)
      if (!seen[i]) throw InputError("DataPool: partition not exhaustive");
  }
};

// The only pool data selection strategies may see: features and the index
// partition. No labels, no noise provenance.
struct PoolView {
  const Eigen::MatrixXd* features = nullptr;
  std::vector<int> labeled;
  std::vector<int> unlabeled;

  Eigen::MatrixXd gather(const std::vector<int>& idx) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), features->cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = features->row(idx[i]);
    return out;
  }
  Eigen::MatrixXd unlabeled_features() const { return gather(unlabeled); }
  Eigen::MatrixXd labeled_features() const { return gather(labeled); }
};

inline PoolView strategy_view(const DataPool& pool) {
  return PoolView{&pool.features, pool.labeled_idx, pool.unlabeled_idx};
}

struct NoiseKind {
  enum Value { noisy_blank, noisy_diverse, noisy_class };
};

struct NoiseSpec {
  NoiseKind::Value kind = NoiseKind::noisy_blank;
  int n_noisy = 0;       // N
  int k_unique = 1;      // K
  int target_class = 0;  // noisy_class only
  int choices_per_type = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_noisy < k_unique || k_unique < 1) throw InputError("NoiseSpec: need N >= K >= 1");
  }
};

// Four interleaved half-moon clouds, one per class (two-moons geometry
// duplicated with a vertical offset). Points of moon `noisy_class_id` get
// uniformly random labels and is_noisy=true; pass -1 for a fully clean pool.
inline DataPool make_four_moons(int n_per_class, double noise_std, int noisy_class_id,
                                std::uint64_t seed) {
  if (n_per_class < 1) throw InputError("make_four_moons: n_per_class must be >= 1");
  if (noisy_class_id < -1 || noisy_class_id > 3)
    throw InputError("make_four_moons: noisy_class_id must be in [-1,3]");

  constexpr double kPi = 3.14159265358979323846;
  constexpr double kPairOffset = 2.2;
  constexpr double kInnerShift = 0.5;   // vertical gap of the interleaved arcs
  constexpr double kArcSweep = 1.5;     // arc length in units of pi; > 1 hooks the moons

  DataPool pool;
  pool.n_classes = 4;
  const int n = 4 * n_per_class;
  pool.features.resize(n, 2);
  pool.labels.resize(n);
  pool.is_noisy.assign(n, 0);

  Rng rng(seed);
  std::normal_distribution<double> jitter(0.0, noise_std);
  std::uniform_int_distribution<int> random_label(0, 3);

  int row = 0;
  for (int moon = 0; moon < 4; ++moon) {
    const bool outer = (moon % 2) == 0;
    const double y_off = (moon / 2) * kPairOffset;
    for (int i = 0; i < n_per_class; ++i) {
      const double t =
          kArcSweep * kPi * (n_per_class == 1 ? 0.5 : static_cast<double>(i) / (n_per_class - 1));
      double px, py;
      if (outer) {
        px = std::cos(t);
        py = std::sin(t) + y_off;
      } else {
        px = 1.0 - std::cos(t);
        py = kInnerShift - std::sin(t) + y_off;
      }
      pool.features(row, 0) = px + jitter(rng);
      pool.features(row, 1) = py + jitter(rng);
      if (moon == noisy_class_id) {
        pool.labels[row] = random_label(rng);
        pool.is_noisy[row] = 1;
      } else {
        pool.labels[row] = moon;
      }
      ++row;
    }
  }
  pool.unlabeled_idx.resize(n);
  std::iota(pool.unlabeled_idx.begin(), pool.unlabeled_idx.end(), 0);
  return pool;
}

// Synthetic miniature "images": per class a fixed random pattern, each example
// drawn as +/-pattern plus Gaussian pixel noise. The sign flip makes classes
// bimodal and therefore not linearly separable, while an MLP learns them.
inline DataPool make_mini_images(int n_per_class, int n_classes = 10, int d = 48,
                                 std::uint64_t seed = 0, double pixel_sigma = 1.0) {
  if (n_per_class < 1) throw InputError("make_mini_images: n_per_class must be >= 1");
  if (n_classes < 2 || d < 1) throw InputError("make_mini_images: bad shape");

  DataPool pool;
  pool.n_classes = n_classes;
  const int n = n_per_class * n_classes;
  pool.features.resize(n, d);
  pool.labels.resize(n);
  pool.is_noisy.assign(n, 0);

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, pixel_sigma);
  std::bernoulli_distribution coin(0.5);

  Eigen::MatrixXd means(n_classes, d);
  for (int c = 0; c < n_classes; ++c)
    for (int j = 0; j < d; ++j) means(c, j) = 2.0 * unit(rng);

  int row = 0;
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      const double sign = coin(rng) ? 1.0 : -1.0;
      for (int j = 0; j < d; ++j) pool.features(row, j) = sign * means(c, j) + gauss(rng);
      pool.labels[row] = c;
      ++row;
    }
  }
  pool.unlabeled_idx.resize(n);
  std::iota(pool.unlabeled_idx.begin(), pool.unlabeled_idx.end(), 0);
  return pool;
}

namespace detail {

inline void append_rows(DataPool& pool, const Eigen::MatrixXd& rows, const std::vector<int>& labels) {
  const Eigen::Index n0 = pool.features.rows();
  Eigen::MatrixXd merged(n0 + rows.rows(), pool.features.cols());
  merged.topRows(n0) = pool.features;
  merged.bottomRows(rows.rows()) = rows;
  pool.features = std::move(merged);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    pool.labels.push_back(labels[i]);
    pool.is_noisy.push_back(1);
    pool.unlabeled_idx.push_back(static_cast<int>(n0 + static_cast<Eigen::Index>(i)));
  }
}

}  // namespace detail

// Appends N identical "blank" examples (every coordinate at the pool's
// feature minimum) with uniformly random labels.
inline DataPool make_noisy_blank(const DataPool& base, int n_noisy, std::uint64_t seed) {
  if (n_noisy < 1) throw InputError("make_noisy_blank: N must be >= 1");
  DataPool pool = base;
  const double lo = base.features.minCoeff();

  Eigen::MatrixXd rows = Eigen::MatrixXd::Constant(n_noisy, base.dim(), lo);
  Rng rng(seed);
  std::uniform_int_distribution<int> random_label(0, base.n_classes - 1);
  std::vector<int> labels(n_noisy);
  for (int i = 0; i < n_noisy; ++i) labels[i] = random_label(rng);

  detail::append_rows(pool, rows, labels);
  return pool;
}

// Appends N examples drawn near-uniformly from K "solid color" prototypes
// (constant per channel block); each prototype has a fixed set of
// choices_per_type candidate classes and every appended copy gets a label
// drawn uniformly from that set.
inline DataPool make_noisy_diverse(const DataPool& base, int n_noisy, int k_unique = 100,
                                   int choices_per_type = 3, std::uint64_t seed = 0) {
  if (k_unique < 1 || n_noisy < k_unique) throw InputError("make_noisy_diverse: need N >= K >= 1");
  if (choices_per_type < 1 || choices_per_type > base.n_classes)
    throw InputError("make_noisy_diverse: choices_per_type exceeds class count");

  DataPool pool = base;
  const int d = base.dim();
  const int n_blocks = (d % 3 == 0) ? 3 : 1;
  const int block = d / n_blocks;
  const double lo = base.features.minCoeff();
  const double hi = base.features.maxCoeff();

  Rng rng(seed);
  std::uniform_real_distribution<double> level(lo, hi);

  Eigen::MatrixXd prototypes(k_unique, d);
  std::vector<std::vector<int>> choices(k_unique);
  std::vector<int> all_classes(base.n_classes);
  std::iota(all_classes.begin(), all_classes.end(), 0);
  for (int t = 0; t < k_unique; ++t) {
    for (int b = 0; b < n_blocks; ++b) {
      const double v = level(rng);
      for (int j = b * block; j < (b + 1) * block; ++j) prototypes(t, j) = v;
    }
    std::vector<int> cand = all_classes;
    std::shuffle(cand.begin(), cand.end(), rng);
    cand.resize(choices_per_type);
    std::sort(cand.begin(), cand.end());
    choices[t] = cand;
  }

  Eigen::MatrixXd rows(n_noisy, d);
  std::vector<int> labels(n_noisy);
  for (int i = 0; i < n_noisy; ++i) {
    const int t = i % k_unique;  // near-uniform repetition over types
    rows.row(i) = prototypes.row(t);
    std::uniform_int_distribution<int> pick(0, choices_per_type - 1);
    labels[i] = choices[t][pick(rng)];
  }

  detail::append_rows(pool, rows, labels);
  return pool;
}

// Copies K distinct clean examples of target_class, relabels each copy once
// with a uniformly random class, then repeats them to N appended noisy
// examples. The originals stay in the pool untouched.
inline DataPool make_noisy_class(const DataPool& base, int k_unique, int n_noisy, int target_class,
                                 std::uint64_t seed) {
  if (k_unique < 1 || n_noisy < k_unique) throw InputError("make_noisy_class: need N >= K >= 1");
  if (target_class < 0 || target_class >= base.n_classes)
    throw InputError("make_noisy_class: target_class out of range");

  std::vector<int> candidates;
  for (int i = 0; i < base.size(); ++i)
    if (base.labels[i] == target_class && !base.is_noisy[i]) candidates.push_back(i);
  if (static_cast<int>(candidates.size()) < k_unique)
    throw InputError("make_noisy_class: not enough clean examples of target_class");

  Rng rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(k_unique);

  std::uniform_int_distribution<int> random_label(0, base.n_classes - 1);
  std::vector<int> proto_label(k_unique);
  for (int t = 0; t < k_unique; ++t) proto_label[t] = random_label(rng);

  Eigen::MatrixXd rows(n_noisy, base.dim());
  std::vector<int> labels(n_noisy);
  std::uniform_int_distribution<int> pick(0, k_unique - 1);
  for (int i = 0; i < n_noisy; ++i) {
    // Each prototype appears at least once; the rest repeat with replacement.
    const int t = i < k_unique ? i : pick(rng);
    rows.row(i) = base.features.row(candidates[t]);
    labels[i] = proto_label[t];
  }

  DataPool pool = base;
  detail::append_rows(pool, rows, labels);
  return pool;
}

// Subsamples the pool to the requested noisy fraction (largest achievable
// size), then draws the initial labeled set uniformly. mix < 0 keeps the
// composition as-is.
inline DataPool init_pool(const DataPool& pool, int n_initial_labeled, double mix,
                          std::uint64_t seed) {
  if (mix > 1.0) throw InputError("init_pool: mix must be <= 1");
  Rng rng(seed);

  std::vector<int> keep;
  if (mix < 0.0) {
    keep.resize(pool.size());
    std::iota(keep.begin(), keep.end(), 0);
  } else {
    std::vector<int> clean, noisy;
    for (int i = 0; i < pool.size(); ++i) (pool.is_noisy[i] ? noisy : clean).push_back(i);

    long total;
    if (mix <= 0.0)
      total = static_cast<long>(clean.size());
    else if (mix >= 1.0)
      total = static_cast<long>(noisy.size());
    else
      total = std::min(static_cast<long>(std::floor(noisy.size() / mix)),
                       static_cast<long>(std::floor(clean.size() / (1.0 - mix))));
    long want_noisy = std::lround(total * mix);
    want_noisy = std::min(want_noisy, static_cast<long>(noisy.size()));
    long want_clean = std::min(total - want_noisy, static_cast<long>(clean.size()));
    if (total <= 0 || (want_noisy == 0 && mix > 0.0) || (want_clean == 0 && mix < 1.0))
      throw InputError("init_pool: requested mix not achievable");

    std::shuffle(clean.begin(), clean.end(), rng);
    std::shuffle(noisy.begin(), noisy.end(), rng);
    keep.assign(clean.begin(), clean.begin() + want_clean);
    keep.insert(keep.end(), noisy.begin(), noisy.begin() + want_noisy);
    std::sort(keep.begin(), keep.end());
  }

  DataPool out;
  out.n_classes = pool.n_classes;
  out.features.resize(static_cast<Eigen::Index>(keep.size()), pool.dim());
  out.labels.resize(keep.size());
  out.is_noisy.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = pool.features.row(keep[i]);
    out.labels[i] = pool.labels[keep[i]];
    out.is_noisy[i] = pool.is_noisy[keep[i]];
  }

  const int n = static_cast<int>(keep.size());
  if (n_initial_labeled < 0 || n_initial_labeled > n)
    throw InputError("init_pool: n_initial_labeled out of range");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  out.labeled_idx.assign(order.begin(), order.begin() + n_initial_labeled);
  out.unlabeled_idx.assign(order.begin() + n_initial_labeled, order.end());
  std::sort(out.labeled_idx.begin(), out.labeled_idx.end());
  std::sort(out.unlabeled_idx.begin(), out.unlabeled_idx.end());
  return out;
}

// Removes n_test clean examples (uniformly chosen) from the pool and returns
// them as a held-out test split.
struct TestSplit {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

inline TestSplit extract_clean_test(DataPool& pool, int n_test, std::uint64_t seed) {
  std::vector<int> clean;
  for (int i = 0; i < pool.size(); ++i)
    if (!pool.is_noisy[i]) clean.push_back(i);
  if (static_cast<int>(clean.size()) < n_test)
    throw InputError("extract_clean_test: not enough clean examples");

  Rng rng(seed);
  std::shuffle(clean.begin(), clean.end(), rng);
  clean.resize(n_test);
  std::vector<std::uint8_t> take(pool.size(), 0);
  for (int i : clean) take[i] = 1;

  TestSplit split;
  split.features.resize(n_test, pool.dim());
  split.labels.resize(n_test);
  std::sort(clean.begin(), clean.end());
  for (int i = 0; i < n_test; ++i) {
    split.features.row(i) = pool.features.row(clean[i]);
    split.labels[i] = pool.labels[clean[i]];
  }

  DataPool rest;
  rest.n_classes = pool.n_classes;
  const int n_rest = pool.size() - n_test;
  rest.features.resize(n_rest, pool.dim());
  rest.labels.reserve(n_rest);
  rest.is_noisy.reserve(n_rest);
  int row = 0;
  for (int i = 0; i < pool.size(); ++i) {
    if (take[i]) continue;
    rest.features.row(row++) = pool.features.row(i);
    rest.labels.push_back(pool.labels[i]);
    rest.is_noisy.push_back(pool.is_noisy[i]);
  }
  rest.unlabeled_idx.resize(n_rest);
  std::iota(rest.unlabeled_idx.begin(), rest.unlabeled_idx.end(), 0);
  pool = std::move(rest);
  return split;
}

}  // namespace hetal
