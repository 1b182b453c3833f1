#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "hetal/acquisition.hpp"
#include "hetal/common.hpp"
#include "hetal/data.hpp"
#include "hetal/finetune.hpp"
#include "hetal/io.hpp"
#include "hetal/nn.hpp"

namespace hetal {

struct ExperimentConfig {
  std::string dataset = "mini";  // moons | mini
  std::string noise = "none";    // none | blank | diverse | class
  std::vector<Strategy> strategies = {Strategy::rand};
  int rounds = 10;
  int k = 100;
  int init_labeled = 200;
  bool use_finetune = false;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string out_dir;

  // pool composition
  double mix = 0.8;  // noisy fraction for the noise benchmarks
  int noise_n = 4000;
  int noise_k = 100;
  int target_class = 0;

  // dataset knobs
  int moons_per_class = 800;
  double moons_noise_std = 0.1;
  int moons_noisy_class = 2;
  int mini_per_class = 120;
  int mini_classes = 10;
  int mini_dim = 48;
  double mini_sigma = 1.0;
  int test_per_class = 200;

  // model / training
  std::vector<int> hidden = {128, 64};
  int epochs = 300;
  int batch_size = 64;
  double lr = 1e-4;
  double ema_alpha = 0.99;
  double dropout = 0.0;  // bald forces at least 0.1
  int bald_passes = 10;

  FinetuneConfig ft;
  bool timing = false;  // wall_ms stays 0 unless enabled, keeping CSV bytes reproducible

  void validate() const {
    if (dataset != "moons" && dataset != "mini") throw ConfigError("dataset must be moons|mini");
    if (noise != "none" && noise != "blank" && noise != "diverse" && noise != "class")
      throw ConfigError("noise must be none|blank|diverse|class");
    if (dataset == "moons" && noise != "none")
      throw ConfigError("noise benchmarks apply to the mini dataset only");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (strategies.empty()) throw ConfigError("need at least one strategy");
    if (seeds.empty()) throw ConfigError("need at least one seed");
    if (epochs < 0 || batch_size < 1 || lr <= 0.0) throw ConfigError("bad training parameters");
    if (ema_alpha < 0.0 || ema_alpha > 1.0) throw ConfigError("ema_alpha must lie in [0,1]");
    ft.validate();
  }

  void apply_kv(const std::string& key, const std::string& value);
  static ExperimentConfig from_file(const std::string& path);
};

struct RoundRecord {
  int round = 0;
  double test_accuracy = 0.0;
  std::vector<int> selected_indices;
  int clean_selected = 0;
  double cumulative_clean_fraction = 0.0;
  double train_loss_final = 0.0;
  double wall_ms = 0.0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::rand;
  std::vector<RoundRecord> rounds;
  ModelState final_model;
  ModelConfig model_config;

  double final_accuracy() const { return rounds.back().test_accuracy; }
  double clean_fraction() const { return rounds.back().cumulative_clean_fraction; }
};

struct StrategyResult {
  Strategy strategy = Strategy::rand;
  std::vector<SeedRun> runs;
  double mean_final_accuracy = 0.0;
  double std_final_accuracy = 0.0;
  double mean_clean_fraction = 0.0;
};

struct BuiltData {
  DataPool pool;
  TestSplit test;
};

namespace detail {

constexpr std::uint64_t kSaltTrainPool = 0x01;
constexpr std::uint64_t kSaltTestPool = 0x02;
constexpr std::uint64_t kSaltNoise = 0x03;
constexpr std::uint64_t kSaltInit = 0x04;
constexpr std::uint64_t kSaltModel = 0x05;
constexpr std::uint64_t kSaltTrainRng = 0x06;
constexpr std::uint64_t kSaltSelect = 0x07;
constexpr std::uint64_t kSaltFinetune = 0x08;

}  // namespace detail

inline BuiltData build_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  BuiltData built;
  if (cfg.dataset == "moons") {
    // The moon geometry is fixed, so train and test pools can be drawn
    // independently. The held-out split covers the clean sub-distribution
    // only, so the noisy moon is dropped from the test pool.
    DataPool train = make_four_moons(cfg.moons_per_class, cfg.moons_noise_std,
                                     cfg.moons_noisy_class, derive_seed(seed, detail::kSaltTrainPool));
    DataPool test = make_four_moons(cfg.test_per_class, cfg.moons_noise_std, -1,
                                    derive_seed(seed, detail::kSaltTestPool));
    std::vector<int> keep;
    for (int i = 0; i < test.size(); ++i)
      if (test.labels[i] != cfg.moons_noisy_class) keep.push_back(i);
    built.test.features.resize(static_cast<Eigen::Index>(keep.size()), test.dim());
    built.test.labels.resize(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      built.test.features.row(static_cast<Eigen::Index>(i)) = test.features.row(keep[i]);
      built.test.labels[i] = test.labels[keep[i]];
    }
    built.pool = init_pool(train, cfg.init_labeled, -1.0, derive_seed(seed, detail::kSaltInit));
  } else {
    // Class patterns depend on the seed, so the clean test split must come
    // out of the same generated pool.
    DataPool all = make_mini_images(cfg.mini_per_class + cfg.test_per_class, cfg.mini_classes,
                                    cfg.mini_dim, derive_seed(seed, detail::kSaltTrainPool),
                                    cfg.mini_sigma);
    built.test =
        extract_clean_test(all, cfg.test_per_class * cfg.mini_classes, derive_seed(seed, detail::kSaltTestPool));

    DataPool noisy = all;
    const std::uint64_t noise_seed = derive_seed(seed, detail::kSaltNoise);
    if (cfg.noise == "blank")
      noisy = make_noisy_blank(all, cfg.noise_n, noise_seed);
    else if (cfg.noise == "diverse")
      noisy = make_noisy_diverse(all, cfg.noise_n, cfg.noise_k, 3, noise_seed);
    else if (cfg.noise == "class")
      noisy = make_noisy_class(all, cfg.noise_k, cfg.noise_n, cfg.target_class, noise_seed);

    const double mix = cfg.noise == "none" ? -1.0 : cfg.mix;
    built.pool = init_pool(noisy, cfg.init_labeled, mix, derive_seed(seed, detail::kSaltInit));
  }

  if (built.pool.size() < cfg.init_labeled + cfg.k * cfg.rounds)
    throw ConfigError("pool too small for init_labeled + k * rounds");
  return built;
}

inline ModelConfig make_model_config(const ExperimentConfig& cfg, const DataPool& pool,
                                     Strategy strategy, std::uint64_t seed, int round) {
  ModelConfig mc;
  mc.layer_widths.push_back(pool.dim());
  for (int h : cfg.hidden) mc.layer_widths.push_back(h);
  mc.layer_widths.push_back(pool.n_classes);
  mc.dropout_rate = strategy == Strategy::bald ? std::max(cfg.dropout, 0.1) : cfg.dropout;
  mc.seed = derive_seed(seed, detail::kSaltModel, round);
  return mc;
}

// One acquisition round: retrain from scratch, optionally fine-tune on
// confident unlabeled examples, evaluate on the clean test split, select k
// unlabeled examples and move them into the labeled set.
inline RoundRecord run_round(DataPool& pool, ModelState& state, EmaState& ema,
                             const TestSplit& test, const ExperimentConfig& cfg, Strategy strategy,
                             std::uint64_t run_seed, int round, int clean_selected_before,
                             int selected_before) {
  if (static_cast<int>(pool.unlabeled_idx.size()) < cfg.k)
    throw PreconditionError("run_round: unlabeled pool exhausted");

  const auto t0 = std::chrono::steady_clock::now();

  ModelConfig mc = make_model_config(cfg, pool, strategy, run_seed, round);
  state = init_model(mc);
  ema = init_ema(state, cfg.ema_alpha);

  Eigen::MatrixXd x_lab(static_cast<Eigen::Index>(pool.labeled_idx.size()), pool.dim());
  std::vector<int> y_lab(pool.labeled_idx.size());
  for (std::size_t i = 0; i < pool.labeled_idx.size(); ++i) {
    x_lab.row(static_cast<Eigen::Index>(i)) = pool.features.row(pool.labeled_idx[i]);
    y_lab[i] = pool.labels[pool.labeled_idx[i]];
  }

  Rng train_rng(derive_seed(run_seed, detail::kSaltTrainRng, round));
  const auto trace = train(state, ema, mc, x_lab, y_lab, cfg.epochs, cfg.batch_size, cfg.lr, train_rng);

  PoolView view = strategy_view(pool);
  if (cfg.use_finetune) {
    FinetuneConfig ft = cfg.ft;
    ft.seed = derive_seed(run_seed, detail::kSaltFinetune, round);
    finetune(state, ema, mc, view.unlabeled_features(), ft);
  }

  RoundRecord rec;
  rec.round = round;
  rec.test_accuracy = accuracy(state, mc, test.features, test.labels);
  rec.train_loss_final = trace.empty() ? 0.0 : trace.back();

  AcquisitionRequest req{strategy, cfg.k, derive_seed(run_seed, detail::kSaltSelect, round),
                         cfg.bald_passes};
  rec.selected_indices = acquire(req, view, state, ema, mc);

  for (int idx : rec.selected_indices)
    if (!pool.is_noisy[idx]) ++rec.clean_selected;
  rec.cumulative_clean_fraction =
      static_cast<double>(clean_selected_before + rec.clean_selected) /
      static_cast<double>(selected_before + cfg.k);

  // Move the selection into the labeled set.
  std::vector<std::uint8_t> picked(pool.size(), 0);
  for (int idx : rec.selected_indices) picked[idx] = 1;
  std::vector<int> still;
  still.reserve(pool.unlabeled_idx.size() - rec.selected_indices.size());
  for (int idx : pool.unlabeled_idx)
    if (!picked[idx]) still.push_back(idx);
  pool.unlabeled_idx = std::move(still);
  pool.labeled_idx.insert(pool.labeled_idx.end(), rec.selected_indices.begin(),
                          rec.selected_indices.end());
  std::sort(pool.labeled_idx.begin(), pool.labeled_idx.end());

  if (cfg.timing) {
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  return rec;
}

inline SeedRun run_seed_once(const ExperimentConfig& cfg, Strategy strategy, std::uint64_t seed) {
  BuiltData built = build_dataset(cfg, seed);
  SeedRun run;
  run.seed = seed;
  run.strategy = strategy;

  ModelState state;
  EmaState ema;
  int clean_so_far = 0, picked_so_far = 0;
  for (int round = 0; round < cfg.rounds; ++round) {
    RoundRecord rec = run_round(built.pool, state, ema, built.test, cfg, strategy, seed, round,
                                clean_so_far, picked_so_far);
    clean_so_far += rec.clean_selected;
    picked_so_far += cfg.k;
    run.rounds.push_back(std::move(rec));
  }
  run.final_model = state;
  run.model_config = make_model_config(cfg, built.pool, strategy, seed, cfg.rounds - 1);
  return run;
}

inline StrategyResult run_experiment(const ExperimentConfig& cfg, Strategy strategy) {
  cfg.validate();
  StrategyResult result;
  result.strategy = strategy;
  for (std::uint64_t seed : cfg.seeds) result.runs.push_back(run_seed_once(cfg, strategy, seed));

  double mean = 0.0, clean = 0.0;
  for (const auto& run : result.runs) {
    mean += run.final_accuracy();
    clean += run.clean_fraction();
  }
  mean /= result.runs.size();
  clean /= result.runs.size();
  double var = 0.0;
  for (const auto& run : result.runs) {
    const double d = run.final_accuracy() - mean;
    var += d * d;
  }
  result.mean_final_accuracy = mean;
  result.mean_clean_fraction = clean;
  result.std_final_accuracy =
      result.runs.size() > 1 ? std::sqrt(var / (result.runs.size() - 1)) : 0.0;
  return result;
}

// ---------------------------------------------------------------------------
// Emission: CSV (fixed schema), JSON summary, SVG learning curve and, for 2-D
// pools, an SVG of the decision regions with the selected points.
// ---------------------------------------------------------------------------

inline std::string results_csv(const std::vector<StrategyResult>& results, int k) {
  std::ostringstream os;
  os << "seed,strategy,round,test_acc,clean_selected,k,cum_clean_frac,train_loss,wall_ms\n";
  for (const auto& sr : results)
    for (const auto& run : sr.runs)
      for (const auto& rec : run.rounds)
        os << run.seed << "," << to_string(run.strategy) << "," << rec.round << ","
           << format_double(rec.test_accuracy) << "," << rec.clean_selected << "," << k << ","
           << format_double(rec.cumulative_clean_fraction) << ","
           << format_double(rec.train_loss_final) << "," << format_double(rec.wall_ms) << "\n";
  return os.str();
}

inline nlohmann::json summary_json(const std::vector<StrategyResult>& results,
                                   const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["dataset"] = cfg.dataset;
  j["noise"] = cfg.noise;
  j["rounds"] = cfg.rounds;
  j["k"] = cfg.k;
  j["init_labeled"] = cfg.init_labeled;
  j["finetune"] = cfg.use_finetune;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& sr : results) {
    nlohmann::json e;
    e["strategy"] = to_string(sr.strategy);
    e["mean_final_accuracy"] = sr.mean_final_accuracy;
    e["std_final_accuracy"] = sr.std_final_accuracy;
    e["mean_clean_fraction"] = sr.mean_clean_fraction;
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& run : sr.runs) {
      nlohmann::json r;
      r["seed"] = run.seed;
      r["final_accuracy"] = run.final_accuracy();
      r["clean_fraction"] = run.clean_fraction();
      per_seed.push_back(r);
    }
    e["seeds"] = per_seed;
    arr.push_back(e);
  }
  j["strategies"] = arr;
  return j;
}

inline void write_learning_curve(const std::vector<StrategyResult>& results,
                                 const std::string& path) {
  const double W = 640, H = 440, ml = 60, mr = 150, mt = 30, mb = 50;
  svg::Writer w(W, H);
  w.rect(0, 0, W, H, "#ffffff");

  int rounds = 1;
  for (const auto& sr : results)
    for (const auto& run : sr.runs)
      rounds = std::max(rounds, static_cast<int>(run.rounds.size()));

  auto sx = [&](double round) {
    return ml + (W - ml - mr) * (rounds == 1 ? 0.5 : round / (rounds - 1));
  };
  auto sy = [&](double acc) { return mt + (H - mt - mb) * (1.0 - acc); };

  for (int g = 0; g <= 10; ++g) {
    const double y = sy(g / 10.0);
    w.line(ml, y, W - mr, y, "#dddddd");
  }
  w.line(ml, sy(0), W - mr, sy(0), "#000000");
  w.line(ml, sy(0), ml, sy(1), "#000000");
  w.text(8, sy(1.0) + 4, "1.0");
  w.text(8, sy(0.5) + 4, "0.5");
  w.text(8, sy(0.0) + 4, "0.0");
  w.text(ml + (W - ml - mr) / 2 - 60, H - 12, "acquisition round");
  w.text(8, 18, "test accuracy");

  int color = 0;
  for (const auto& sr : results) {
    // mean accuracy per round across seeds
    std::vector<std::pair<double, double>> pts;
    for (int r = 0; r < rounds; ++r) {
      double acc = 0.0;
      int cnt = 0;
      for (const auto& run : sr.runs)
        if (r < static_cast<int>(run.rounds.size())) {
          acc += run.rounds[r].test_accuracy;
          ++cnt;
        }
      if (cnt) pts.push_back({sx(r), sy(acc / cnt)});
    }
    const char* c = svg::class_color(color);
    w.polyline(pts, c);
    w.rect(W - mr + 16, mt + 20.0 * color, 12, 12, c);
    w.text(W - mr + 34, mt + 20.0 * color + 10, to_string(sr.strategy));
    ++color;
  }
  w.save(path);
}

inline void write_decision_regions(const SeedRun& run, const DataPool& pool,
                                   const std::string& path) {
  if (pool.dim() != 2) return;
  const double W = 520, H = 520, m = 10;
  const double x0 = pool.features.col(0).minCoeff(), x1 = pool.features.col(0).maxCoeff();
  const double y0 = pool.features.col(1).minCoeff(), y1 = pool.features.col(1).maxCoeff();
  const double padx = 0.1 * (x1 - x0), pady = 0.1 * (y1 - y0);

  auto px = [&](double x) { return m + (W - 2 * m) * (x - (x0 - padx)) / ((x1 + padx) - (x0 - padx)); };
  auto py = [&](double y) { return m + (H - 2 * m) * (1.0 - (y - (y0 - pady)) / ((y1 + pady) - (y0 - pady))); };

  svg::Writer w(W, H);
  w.rect(0, 0, W, H, "#ffffff");

  const int G = 70;
  Eigen::MatrixXd grid(G * G, 2);
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) {
      grid(i * G + j, 0) = (x0 - padx) + ((x1 + padx) - (x0 - padx)) * (j + 0.5) / G;
      grid(i * G + j, 1) = (y0 - pady) + ((y1 + pady) - (y0 - pady)) * (i + 0.5) / G;
    }
  auto pred = forward(run.final_model, run.model_config, grid);
  const double cw = (W - 2 * m) / G, ch = (H - 2 * m) / G;
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) {
      Eigen::Index c;
      pred.probs.row(i * G + j).maxCoeff(&c);
      w.rect(m + j * cw, m + (G - 1 - i) * ch, cw + 0.5, ch + 0.5,
             svg::class_color(static_cast<int>(c)), 0.25);
    }

  for (int i = 0; i < pool.size(); ++i)
    w.circle(px(pool.features(i, 0)), py(pool.features(i, 1)), 1.2, "#999999");
  for (const auto& rec : run.rounds)
    for (int idx : rec.selected_indices)
      w.circle(px(pool.features(idx, 0)), py(pool.features(idx, 1)), 3.0,
               svg::class_color(pool.labels[idx]), "#000000");
  w.save(path);
}

inline void emit_results(const std::vector<StrategyResult>& results, const ExperimentConfig& cfg,
                         const std::string& dir) {
  ensure_dir(dir);
  {
    std::ofstream out(dir + "/runs.csv");
    if (!out) throw IoError("emit_results: cannot open runs.csv in " + dir);
    out << results_csv(results, cfg.k);
  }
  {
    std::ofstream out(dir + "/summary.json");
    if (!out) throw IoError("emit_results: cannot open summary.json in " + dir);
    out << summary_json(results, cfg).dump(2) << "\n";
  }
  write_learning_curve(results, dir + "/learning_curve.svg");
  if (cfg.dataset == "moons") {
    for (const auto& sr : results) {
      if (sr.runs.empty()) continue;
      // Re-derive the first seed's pool so the scatter shows what that run saw.
      BuiltData built = build_dataset(cfg, sr.runs.front().seed);
      write_decision_regions(sr.runs.front(), built.pool,
                             dir + "/decision_regions_" + to_string(sr.strategy) + ".svg");
    }
  }
}

inline std::vector<StrategyResult> run_suite(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<StrategyResult> results;
  for (Strategy s : cfg.strategies) results.push_back(run_experiment(cfg, s));
  if (!cfg.out_dir.empty()) emit_results(results, cfg, cfg.out_dir);
  return results;
}

// ---------------------------------------------------------------------------
// Flat key=value configuration files with CLI-style keys.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <typename T>
inline std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    if constexpr (std::is_same_v<T, std::uint64_t>)
      out.push_back(std::stoull(item));
    else
      out.push_back(static_cast<T>(std::stol(item)));
  }
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean value: " + v);
}

}  // namespace detail

inline void ExperimentConfig::apply_kv(const std::string& key, const std::string& value) {
  try {
    if (key == "dataset") dataset = value;
    else if (key == "noise") noise = value;
    else if (key == "strategy") {
      strategies.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!detail::trim(item).empty()) strategies.push_back(strategy_from_string(detail::trim(item)));
    } else if (key == "rounds") rounds = std::stoi(value);
    else if (key == "k") k = std::stoi(value);
    else if (key == "init_labeled") init_labeled = std::stoi(value);
    else if (key == "finetune") use_finetune = detail::parse_bool(value);
    else if (key == "seeds") seeds = detail::parse_list<std::uint64_t>(value);
    else if (key == "out") out_dir = value;
    else if (key == "mix") mix = std::stod(value);
    else if (key == "noise_n") noise_n = std::stoi(value);
    else if (key == "noise_k") noise_k = std::stoi(value);
    else if (key == "target_class") target_class = std::stoi(value);
    else if (key == "moons_per_class") moons_per_class = std::stoi(value);
    else if (key == "moons_noise_std") moons_noise_std = std::stod(value);
    else if (key == "moons_noisy_class") moons_noisy_class = std::stoi(value);
    else if (key == "mini_per_class") mini_per_class = std::stoi(value);
    else if (key == "mini_classes") mini_classes = std::stoi(value);
    else if (key == "mini_dim") mini_dim = std::stoi(value);
    else if (key == "mini_sigma") mini_sigma = std::stod(value);
    else if (key == "test_per_class") test_per_class = std::stoi(value);
    else if (key == "hidden") hidden = detail::parse_list<int>(value);
    else if (key == "epochs") epochs = std::stoi(value);
    else if (key == "batch_size") batch_size = std::stoi(value);
    else if (key == "lr") lr = std::stod(value);
    else if (key == "ema_alpha") ema_alpha = std::stod(value);
    else if (key == "dropout") dropout = std::stod(value);
    else if (key == "bald_passes") bald_passes = std::stoi(value);
    else if (key == "timing") timing = detail::parse_bool(value);
    else if (key == "ft_threshold") ft.confidence_threshold = std::stod(value);
    else if (key == "ft_epochs") ft.ft_epochs = std::stoi(value);
    else if (key == "ft_lr") ft.ft_lr = std::stod(value);
    else if (key == "ft_jitter") ft.augment.jitter_sigma = std::stod(value);
    else if (key == "ft_feature_dropout") ft.augment.feature_dropout_rate = std::stod(value);
    else if (key == "ft_channel_scale") ft.augment.channel_scale_range = std::stod(value);
    else if (key == "ft_cutout") ft.augment.cutout_fraction = std::stod(value);
    else if (key == "ft_ops") ft.augment.ops_per_example = std::stoi(value);
    else throw ConfigError("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value for " + key + ": " + value);
  } catch (const std::out_of_range&) {
    throw ConfigError("value out of range for " + key + ": " + value);
  }
}

inline ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    cfg.apply_kv(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

// Applies the dataset-appropriate default augmentation family if the user
// did not configure one explicitly.
inline void apply_augment_defaults(ExperimentConfig& cfg) {
  if (cfg.dataset == "moons") {
    cfg.ft.augment.family = AugmentFamily::tabular;
    if (cfg.ft.augment.jitter_sigma == 0.1 && cfg.ft.augment.feature_dropout_rate == 0.0)
      cfg.ft.augment.jitter_sigma = 0.05;
  } else {
    cfg.ft.augment.family = AugmentFamily::image;
    if (cfg.ft.augment.jitter_sigma == 0.1 && cfg.ft.augment.channel_scale_range == 0.0 &&
        cfg.ft.augment.cutout_fraction == 0.0) {
      cfg.ft.augment.jitter_sigma = 0.3;
      cfg.ft.augment.channel_scale_range = 0.15;
      cfg.ft.augment.cutout_fraction = 0.25;
      cfg.ft.augment.ops_per_example = 2;
    }
  }
}

}  // namespace hetal
