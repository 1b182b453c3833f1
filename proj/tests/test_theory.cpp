#include <catch_amalgamated.hpp>

#include <bit>

#include "hetal/theory.hpp"

using namespace hetal;
using Catch::Approx;

namespace {

// Exhaustive oracle: walk every size-s subset of {1..n} (element j has
// population loss rank j) and count how often rank j lands in the subset's
// top q.
std::vector<double> gamma_enumerated(int n, int s, int q) {
  std::vector<long> count(n, 0);
  long total = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != s) continue;
    ++total;
    int taken = 0;
    for (int j = 0; j < n && taken < q; ++j)
      if (mask & (1u << j)) {
        ++count[j];
        ++taken;
      }
  }
  std::vector<double> gamma(n);
  for (int j = 0; j < n; ++j) gamma[j] = static_cast<double>(count[j]) / total;
  return gamma;
}

}  // namespace

TEST_CASE("gamma weights: hand case n=4, s=2, q=1") {
  auto g = gamma_weights(4, 2, 1);
  REQUIRE(g[0] == Approx(0.5).epsilon(1e-14));
  REQUIRE(g[1] == Approx(1.0 / 3.0).epsilon(1e-14));
  REQUIRE(g[2] == Approx(1.0 / 6.0).epsilon(1e-14));
  REQUIRE(g[3] == Approx(0.0).margin(1e-14));
}

TEST_CASE("gamma weights: q = s degenerates to s/n for every rank") {
  for (auto [n, s] : std::vector<std::pair<int, int>>{{5, 2}, {9, 4}, {12, 12}}) {
    auto g = gamma_weights(n, s, s);
    for (double v : g) REQUIRE(v == Approx(static_cast<double>(s) / n).epsilon(1e-12));
  }
}

TEST_CASE("gamma weights match exhaustive enumeration for every n <= 12") {
  for (int n = 1; n <= 12; ++n)
    for (int s = 1; s <= n; ++s)
      for (int q = 1; q <= s; ++q) {
        auto lib = gamma_weights(n, s, q);
        auto ref = gamma_enumerated(n, s, q);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
          REQUIRE(lib[j] == Approx(ref[j]).margin(1e-12));
          REQUIRE(lib[j] <= static_cast<double>(s) / n + 1e-12);
          if (j > 0) REQUIRE(lib[j] <= lib[j - 1] + 1e-12);
          sum += lib[j];
        }
        REQUIRE(sum == Approx(static_cast<double>(q)).margin(1e-12));
      }
  REQUIRE_THROWS_AS(gamma_weights(4, 5, 1), InputError);
  REQUIRE_THROWS_AS(gamma_weights(4, 2, 3), InputError);
  REQUIRE_THROWS_AS(gamma_weights(4, 2, 0), InputError);
}

TEST_CASE("gamma weights: closed form agrees with minibatch simulation at large n") {
  const int n = 500, s = 32, q = 8;
  auto g = gamma_weights(n, s, q);

  const int trials = 20000;
  Rng rng(77);
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> hits = {0, 0, 0, 0};
  const std::vector<int> probe = {0, 49, 99, 199};  // ranks 1, 50, 100, 200

  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < s; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<int> batch(pool.begin(), pool.begin() + s);
    std::sort(batch.begin(), batch.end());
    for (std::size_t pi = 0; pi < probe.size(); ++pi)
      for (int r = 0; r < q; ++r)
        if (batch[r] == probe[pi]) ++hits[pi];
  }
  for (std::size_t pi = 0; pi < probe.size(); ++pi) {
    const double p = g[probe[pi]];
    const double sigma = std::sqrt(trials * p * (1.0 - p));
    REQUIRE(std::abs(hits[pi] - trials * p) <= 3.0 * sigma + 1.0);
  }
}

TEST_CASE("topq_loss: constant losses collapse to the constant") {
  auto spec = TopQSpec::make(6, 3, 2);
  Eigen::VectorXd losses = Eigen::VectorXd::Constant(6, 1.7);
  REQUIRE(topq_loss(losses, spec) == Approx(1.7).epsilon(1e-12));
}

TEST_CASE("topq_loss: two-point enumeration instance") {
  auto spec = TopQSpec::make(2, 2, 1);
  REQUIRE(spec.gamma[0] == Approx(1.0).epsilon(1e-14));
  REQUIRE(spec.gamma[1] == Approx(0.0).margin(1e-14));
  Eigen::VectorXd losses(2);
  losses << 3.0, 1.0;
  REQUIRE(topq_loss(losses, spec) == Approx(3.0).epsilon(1e-14));
}

TEST_CASE("topq_loss majorizes the mean and q=s recovers it exactly") {
  Rng rng(5);
  std::uniform_real_distribution<double> unit(0.0, 4.0);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 11;
    Eigen::VectorXd losses(n);
    for (int i = 0; i < n; ++i) losses[i] = unit(rng);

    // independent sort-based oracle
    auto spec = TopQSpec::make(n, 5, 2);
    std::vector<double> sorted(losses.data(), losses.data() + n);
    std::sort(sorted.rbegin(), sorted.rend());
    double want = 0.0;
    for (int j = 0; j < n; ++j) want += spec.gamma[j] * sorted[j];
    want /= spec.q;
    REQUIRE(topq_loss(losses, spec) == Approx(want).margin(1e-12));
    REQUIRE(topq_loss(losses, spec) >= losses.mean() - 1e-12);

    auto full = TopQSpec::make(n, 5, 5);
    REQUIRE(topq_loss(losses, full) == Approx(losses.mean()).margin(1e-12));
  }
}

TEST_CASE("r_weights: permutation identity and stable ties") {
  auto spec = TopQSpec::make(5, 3, 2);
  Rng rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd losses(5);
    for (int i = 0; i < 5; ++i) losses[i] = unit(rng);
    Eigen::VectorXd r = r_weights(losses, spec);
    double via_r = 0.0;
    for (int i = 0; i < 5; ++i) via_r += r[i] * losses[i];
    REQUIRE(via_r / spec.q == Approx(topq_loss(losses, spec)).margin(1e-12));
  }

  // Ties: ranks assigned in original index order.
  Eigen::VectorXd tied(4);
  tied << 2.0, 2.0, 5.0, 2.0;
  Eigen::VectorXd r = r_weights(tied, spec.n == 4 ? spec : TopQSpec::make(4, 2, 1));
  auto spec4 = TopQSpec::make(4, 2, 1);
  r = r_weights(tied, spec4);
  REQUIRE(r[2] == Approx(spec4.gamma[0]).margin(1e-14));  // highest loss gets rank 1
  REQUIRE(r[0] == Approx(spec4.gamma[1]).margin(1e-14));  // first tie -> rank 2
  REQUIRE(r[1] == Approx(spec4.gamma[2]).margin(1e-14));
  REQUIRE(r[3] == Approx(spec4.gamma[3]).margin(1e-14));
}

TEST_CASE("estimate_Q: identity corruption never goes negative") {
  const int n = 24;
  auto sampler = gaussian_blob_sampler(n, 2, 2, 2.0, 0.5);
  auto spec = TopQSpec::make(n, 6, 2);

  ThetaSpec theta;
  theta.config = ModelConfig{{2, 2}, Activation::relu, 0.0, 0};
  theta.norm_caps = {4.0};
  theta.restarts = 3;
  theta.steps = 120;
  theta.lr = 0.1;

  auto est = estimate_Q(theta, sampler, CorruptionSpec::identity(n), spec, 6, 99);
  REQUIRE(est.trials_used == 6);
  for (double v : est.per_trial) REQUIRE(v >= -1e-12);  // L_q - L >= 0 pointwise
  REQUIRE(est.estimate >= -est.std_error);
}

TEST_CASE("estimate_Q: heavy label corruption drives the factor negative") {
  // Overparameterized regime: 40 points in 48 dimensions are linearly
  // separable under any labeling, so the family can fit the corrupted labels
  // while the clean loss on the flipped examples explodes.
  const int n = 40, d = 48;
  DatasetSampler sampler = [=](std::uint64_t seed, Eigen::MatrixXd& x, std::vector<int>& y) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    x.resize(n, d);
    y.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = g(rng);
      y[i] = x(i, 0) > 0.0 ? 1 : 0;
    }
  };
  auto spec = TopQSpec::make(n, 8, 2);

  std::vector<int> half(n / 2);
  std::iota(half.begin(), half.end(), 0);
  auto corruption = CorruptionSpec::uniform_relabel(n, half, 2, 1234);

  ThetaSpec theta;
  theta.config = ModelConfig{{d, 2}, Activation::relu, 0.0, 0};
  theta.norm_caps = {8.0};
  theta.restarts = 3;
  theta.steps = 300;
  theta.lr = 0.1;

  auto est = estimate_Q(theta, sampler, corruption, spec, 8, 4321);
  REQUIRE(est.estimate < -3.0 * est.std_error);
  REQUIRE(est.estimate < 0.0);
}

TEST_CASE("estimate_Q: singleton family equals a direct recomputation") {
  const int n = 12;
  auto sampler = gaussian_blob_sampler(n, 2, 2, 1.5, 0.7);
  auto spec = TopQSpec::make(n, 4, 2);

  ModelConfig cfg{{2, 2}, Activation::relu, 0.0, 3};
  ModelState fixed = init_model(cfg);

  ThetaSpec theta;
  theta.config = cfg;
  theta.fixed_point = fixed;

  std::vector<int> subset = {0, 1, 2};
  auto corruption = CorruptionSpec::uniform_relabel(n, subset, 2, 5);
  auto est = estimate_Q(theta, sampler, corruption, spec, 3, 777);

  // Recompute each trial objective by hand from the same model.
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::MatrixXd x;
    std::vector<int> y;
    sampler(derive_seed(777, 0xd5, trial), x, y);
    Eigen::MatrixXd xc = x;
    std::vector<int> yc = y;
    corruption.apply(xc, yc);

    Eigen::VectorXd lc = cross_entropy(forward(fixed, cfg, xc).probs, yc);
    Eigen::VectorXd ll = cross_entropy(forward(fixed, cfg, x).probs, y);

    // ranks by decreasing corrupted loss, ties by index
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return lc[a] > lc[b]; });
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
      acc += (spec.gamma[j] * n / spec.q) * lc[order[j]];
    for (int i = 0; i < n; ++i) acc -= ll[i];
    REQUIRE(est.per_trial[trial] == Approx(acc / n).margin(1e-12));
  }
}

TEST_CASE("rademacher bound: hand value and scaling laws") {
  REQUIRE(rademacher_bound(1.0, {1.0}, 1) == Approx(2.177410022515475).margin(1e-9));
  REQUIRE(rademacher_bound(1.0, {1.0}, 1) ==
          Approx(std::sqrt(2.0 * std::log(2.0)) + 1.0).epsilon(1e-14));

  const double b1 = rademacher_bound(2.0, {1.5, 0.8, 2.0}, 100);
  REQUIRE(rademacher_bound(2.0, {1.5, 0.8, 2.0}, 400) == Approx(b1 / 2.0).epsilon(1e-12));
  REQUIRE(rademacher_bound(2.0, {3.0, 0.8, 2.0}, 100) == Approx(2.0 * b1).epsilon(1e-12));

  REQUIRE_THROWS_AS(rademacher_bound(0.0, {1.0}, 1), InputError);
  REQUIRE_THROWS_AS(rademacher_bound(1.0, {-1.0}, 1), InputError);
  REQUIRE_THROWS_AS(rademacher_bound(1.0, {1.0}, 0), InputError);
}

TEST_CASE("gap report: all five terms present and finite") {
  const int n = 30;
  auto sampler = gaussian_blob_sampler(n, 2, 2, 2.0, 0.5);

  ModelConfig cfg{{2, 8, 2}, Activation::relu, 0.0, 7};
  ModelState model = init_model(cfg);
  EmaState ema = init_ema(model, 0.9);
  Eigen::MatrixXd x;
  std::vector<int> y;
  sampler(9, x, y);
  Rng rng(3);
  train(model, ema, cfg, x, y, 80, 8, 1e-2, rng);

  std::vector<int> subset = {0, 1, 2, 3, 4};
  auto corruption = CorruptionSpec::uniform_relabel(n, subset, 2, 5);
  auto spec = TopQSpec::make(n, 6, 2);

  ThetaSpec theta;
  theta.config = ModelConfig{{2, 2}, Activation::relu, 0.0, 0};
  theta.norm_caps = {4.0};
  theta.restarts = 2;
  theta.steps = 60;
  theta.lr = 0.1;

  GapReport rep =
      generalization_gap_report(model, cfg, sampler, x, y, corruption, spec, theta, 4, 0.1);
  for (double v : {rep.expected_loss, rep.topq_train_loss, rep.rademacher_term,
                   rep.confidence_term, rep.q_estimate}) {
    REQUIRE(std::isfinite(v));
  }
  REQUIRE(rep.q_trials.size() == 4);

  const std::string table = rep.table();
  REQUIRE(table.find("expected_loss") != std::string::npos);
  REQUIRE(table.find("topq_train_loss") != std::string::npos);
  REQUIRE(table.find("rademacher_term") != std::string::npos);
  REQUIRE(table.find("confidence_term") != std::string::npos);
  REQUIRE(table.find("q_factor") != std::string::npos);
}

TEST_CASE("gap report: delta = 1 confidence term matches the plug-in formula") {
  const int n = 20;
  auto sampler = gaussian_blob_sampler(n, 2, 2, 2.0, 0.5);
  ModelConfig cfg{{2, 2}, Activation::relu, 0.0, 1};
  ModelState model = init_model(cfg);
  Eigen::MatrixXd x;
  std::vector<int> y;
  sampler(4, x, y);

  ThetaSpec theta;
  theta.config = cfg;
  theta.fixed_point = model;
  auto spec = TopQSpec::make(n, 5, 2);

  GapReport rep = generalization_gap_report(model, cfg, sampler, x, y,
                                            CorruptionSpec::identity(n), spec, theta, 2, 1.0);
  const double want = rep.loss_range * (2.0 + 5.0 / 2.0) * std::sqrt(std::log(2.0) / (2.0 * n));
  REQUIRE(rep.confidence_term == Approx(want).epsilon(1e-12));
}

TEST_CASE("gap report: zero-one loss of a perfect classifier is exactly zero") {
  const int n = 24;
  auto sampler = gaussian_blob_sampler(n, 2, 2, 4.0, 0.1);  // far apart blobs

  // Hand-built linear separator along the first coordinate.
  ModelConfig cfg{{2, 2}, Activation::relu, 0.0, 0};
  ModelState model = init_model(cfg);
  model.weights[0] << 10.0, 0.0, -10.0, 0.0;
  model.biases[0].setZero();

  ThetaSpec theta;
  theta.config = cfg;
  theta.fixed_point = model;
  auto spec = TopQSpec::make(n, 6, 2);
  Eigen::MatrixXd x;
  std::vector<int> y;
  sampler(11, x, y);

  GapReport rep = generalization_gap_report(model, cfg, sampler, x, y, CorruptionSpec::identity(n),
                                            spec, theta, 2, 0.5, LossKind::zero_one);
  REQUIRE(rep.expected_loss == 0.0);
  REQUIRE(rep.loss_range == 1.0);
}
