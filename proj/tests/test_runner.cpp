#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hetal/hetal.hpp"

using namespace hetal;
using Catch::Approx;

namespace {

// Minimal well-formedness check for the emitted SVG subset: balanced tags,
// quoted attributes, single root.
bool xml_well_formed(const std::string& text) {
  std::size_t i = 0;
  std::vector<std::string> stack;
  int roots = 0;
  auto fail = [](const char*) { return false; };

  if (text.rfind("<?xml", 0) == 0) {
    i = text.find("?>");
    if (i == std::string::npos) return fail("unterminated declaration");
    i += 2;
  }
  while (i < text.size()) {
    if (text[i] != '<') {
      ++i;
      continue;
    }
    if (text.compare(i, 2, "</") == 0) {
      const auto end = text.find('>', i);
      if (end == std::string::npos) return fail("unterminated close tag");
      const std::string name = text.substr(i + 2, end - i - 2);
      if (stack.empty() || stack.back() != name) return fail("mismatched close tag");
      stack.pop_back();
      i = end + 1;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && (std::isalnum(text[j]) || text[j] == ':' || text[j] == '-')) ++j;
    const std::string name = text.substr(i + 1, j - i - 1);
    if (name.empty()) return fail("empty tag name");
    bool in_quote = false;
    std::size_t end = j;
    while (end < text.size() && (in_quote || text[end] != '>')) {
      if (text[end] == '"') in_quote = !in_quote;
      ++end;
    }
    if (end >= text.size()) return fail("unterminated tag");
    if (in_quote) return fail("unterminated attribute");
    const bool self_closed = text[end - 1] == '/';
    if (!self_closed) {
      if (stack.empty()) ++roots;
      stack.push_back(name);
    } else if (stack.empty()) {
      ++roots;
    }
    i = end + 1;
  }
  return stack.empty() && roots == 1;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.dataset = "mini";
  cfg.noise = "blank";
  cfg.mini_per_class = 20;
  cfg.mini_dim = 24;
  cfg.mini_classes = 5;
  cfg.test_per_class = 20;
  cfg.noise_n = 800;
  cfg.noise_k = 1;
  cfg.mix = 0.8;
  cfg.init_labeled = 50;
  cfg.k = 20;
  cfg.rounds = 3;
  cfg.hidden = {32, 16};
  cfg.epochs = 15;
  cfg.lr = 1e-3;
  cfg.seeds = {1};
  return cfg;
}

}  // namespace

TEST_CASE("run_round grows the labeled set by exactly k and conserves the pool") {
  ExperimentConfig cfg = tiny_config();
  BuiltData built = build_dataset(cfg, 7);
  const int n = built.pool.size();
  const int labeled_before = static_cast<int>(built.pool.labeled_idx.size());

  ModelState state;
  EmaState ema;
  RoundRecord rec =
      run_round(built.pool, state, ema, built.test, cfg, Strategy::rand, 7, 0, 0, 0);

  REQUIRE(static_cast<int>(built.pool.labeled_idx.size()) == labeled_before + cfg.k);
  REQUIRE(static_cast<int>(rec.selected_indices.size()) == cfg.k);
  REQUIRE(built.pool.size() == n);
  built.pool.validate();  // disjoint + exhaustive partition

  // Recount oracle for the clean/noisy split of the selection.
  int clean = 0;
  for (int idx : rec.selected_indices)
    if (!built.pool.is_noisy[idx]) ++clean;
  REQUIRE(rec.clean_selected == clean);
  REQUIRE(rec.clean_selected == cfg.k - (cfg.k - clean));
  REQUIRE(rec.cumulative_clean_fraction ==
          Approx(static_cast<double>(clean) / cfg.k).margin(1e-12));
  REQUIRE(rec.test_accuracy >= 0.0);
  REQUIRE(rec.test_accuracy <= 1.0);
}

TEST_CASE("run_round: no index is ever selected twice across rounds") {
  ExperimentConfig cfg = tiny_config();
  BuiltData built = build_dataset(cfg, 3);
  ModelState state;
  EmaState ema;
  std::set<int> seen;
  int clean_so_far = 0, picked = 0;
  for (int round = 0; round < cfg.rounds; ++round) {
    RoundRecord rec = run_round(built.pool, state, ema, built.test, cfg, Strategy::conf, 3, round,
                                clean_so_far, picked);
    for (int idx : rec.selected_indices) {
      REQUIRE(seen.count(idx) == 0);
      seen.insert(idx);
    }
    clean_so_far += rec.clean_selected;
    picked += cfg.k;
  }
}

TEST_CASE("run_experiment: reproducible records and non-negative spread") {
  ExperimentConfig cfg = tiny_config();
  cfg.rounds = 1;
  cfg.seeds = {11, 12};
  auto a = run_experiment(cfg, Strategy::rand);
  auto b = run_experiment(cfg, Strategy::rand);
  REQUIRE(a.runs.size() == 2);
  REQUIRE(a.std_final_accuracy >= 0.0);
  for (std::size_t r = 0; r < a.runs.size(); ++r) {
    REQUIRE(a.runs[r].rounds[0].test_accuracy == b.runs[r].rounds[0].test_accuracy);
    REQUIRE(a.runs[r].rounds[0].selected_indices == b.runs[r].rounds[0].selected_indices);
    REQUIRE(a.runs[r].rounds[0].train_loss_final == b.runs[r].rounds[0].train_loss_final);
  }
}

TEST_CASE("random acquisition tracks the pool's clean proportion") {
  ExperimentConfig cfg = tiny_config();
  cfg.mini_per_class = 60;     // 300 clean
  cfg.noise_n = 1600;          // pool -> 2000 at mix 0.8
  cfg.epochs = 1;              // selection is model-free for rand
  cfg.rounds = 10;
  cfg.k = 50;
  cfg.init_labeled = 40;
  cfg.seeds = {5};
  auto res = run_experiment(cfg, Strategy::rand);
  const double frac = res.runs[0].clean_fraction();
  REQUIRE(frac == Approx(0.2).margin(0.05));
}

TEST_CASE("emit_results: CSV schema, row count, exact round-trip") {
  ExperimentConfig cfg = tiny_config();
  cfg.seeds = {1, 2};
  auto res = run_experiment(cfg, Strategy::marg);
  const std::string csv = results_csv({res}, cfg.k);

  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  REQUIRE(header == "seed,strategy,round,test_acc,clean_selected,k,cum_clean_frac,train_loss,wall_ms");

  int rows = 0;
  std::string line;
  std::size_t run_i = 0, round_i = 0;
  while (std::getline(lines, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 9);

    const RoundRecord& rec = res.runs[run_i].rounds[round_i];
    REQUIRE(std::stoull(cells[0]) == res.runs[run_i].seed);
    REQUIRE(cells[1] == "marg");
    REQUIRE(std::stoi(cells[2]) == rec.round);
    REQUIRE(std::stod(cells[3]) == rec.test_accuracy);  // %.17g round-trips exactly
    REQUIRE(std::stoi(cells[4]) == rec.clean_selected);
    REQUIRE(std::stoi(cells[5]) == cfg.k);
    REQUIRE(std::stod(cells[6]) == rec.cumulative_clean_fraction);
    REQUIRE(std::stod(cells[7]) == rec.train_loss_final);
    REQUIRE(std::stod(cells[8]) == rec.wall_ms);
    if (++round_i == res.runs[run_i].rounds.size()) {
      round_i = 0;
      ++run_i;
    }
  }
  REQUIRE(rows == cfg.rounds * static_cast<int>(cfg.seeds.size()));
}

TEST_CASE("emit_results writes CSV, JSON, and well-formed SVG files") {
  const std::string dir = std::filesystem::temp_directory_path() / "hetal_emit_test";
  std::filesystem::remove_all(dir);

  ExperimentConfig cfg = tiny_config();
  cfg.out_dir = dir;
  cfg.strategies = {Strategy::rand, Strategy::conf};
  auto results = run_suite(cfg);
  REQUIRE(results.size() == 2);

  REQUIRE(std::filesystem::exists(dir + "/runs.csv"));
  REQUIRE(std::filesystem::exists(dir + "/summary.json"));
  REQUIRE(std::filesystem::exists(dir + "/learning_curve.svg"));

  auto parsed = nlohmann::json::parse(read_file(dir + "/summary.json"));
  REQUIRE(parsed["strategies"].size() == 2);
  REQUIRE(parsed["strategies"][0]["strategy"] == "rand");
  REQUIRE(parsed["k"] == cfg.k);

  REQUIRE(xml_well_formed(read_file(dir + "/learning_curve.svg")));
  std::filesystem::remove_all(dir);
}

TEST_CASE("moons experiments also emit a decision-region figure") {
  const std::string dir = std::filesystem::temp_directory_path() / "hetal_moons_test";
  std::filesystem::remove_all(dir);

  ExperimentConfig cfg;
  cfg.dataset = "moons";
  cfg.noise = "none";
  cfg.moons_per_class = 60;
  cfg.test_per_class = 30;
  cfg.init_labeled = 30;
  cfg.k = 10;
  cfg.rounds = 2;
  cfg.hidden = {16, 8};
  cfg.epochs = 20;
  cfg.lr = 1e-2;
  cfg.seeds = {4};
  cfg.out_dir = dir;
  cfg.strategies = {Strategy::coreset};
  run_suite(cfg);

  const std::string fig = dir + "/decision_regions_coreset.svg";
  REQUIRE(std::filesystem::exists(fig));
  REQUIRE(xml_well_formed(read_file(fig)));
  std::filesystem::remove_all(dir);
}

TEST_CASE("determinism: two runs of a fixed config produce identical CSV bytes") {
  ExperimentConfig cfg = tiny_config();
  cfg.seeds = {42};
  auto csv_once = [&]() { return results_csv({run_experiment(cfg, Strategy::lhd)}, cfg.k); };
  REQUIRE(csv_once() == csv_once());
}

TEST_CASE("blindness audit: hidden fields cannot influence any strategy") {
  ExperimentConfig cfg = tiny_config();
  cfg.dropout = 0.1;
  BuiltData built = build_dataset(cfg, 13);

  // Tampered twin: noise flags flipped, unlabeled labels permuted. Labeled
  // labels stay, since training legitimately consumes them.
  BuiltData twin = built;
  for (auto& flag : twin.pool.is_noisy) flag = !flag;
  std::vector<int> unl = twin.pool.unlabeled_idx;
  for (std::size_t i = 0; i + 1 < unl.size(); i += 2)
    std::swap(twin.pool.labels[unl[i]], twin.pool.labels[unl[i + 1]]);

  for (Strategy strat : {Strategy::rand, Strategy::conf, Strategy::marg, Strategy::bald,
                         Strategy::coreset, Strategy::badge, Strategy::lhd}) {
    DataPool a = built.pool, b = twin.pool;
    ModelState sa, sb;
    EmaState ea, eb;
    RoundRecord ra = run_round(a, sa, ea, built.test, cfg, strat, 13, 0, 0, 0);
    RoundRecord rb = run_round(b, sb, eb, twin.test, cfg, strat, 13, 0, 0, 0);
    REQUIRE(ra.selected_indices == rb.selected_indices);
    REQUIRE(ra.test_accuracy == rb.test_accuracy);
  }
}

TEST_CASE("config files: parsing, overrides, and rejection of unknown keys") {
  const std::string path = std::filesystem::temp_directory_path() / "hetal_cfg_test.cfg";
  {
    std::ofstream out(path);
    out << "# comment line\n"
        << "dataset = mini\n"
        << "noise = diverse\n"
        << "strategy = conf,lhd\n"
        << "rounds = 4\n"
        << "k = 25\n"
        << "init_labeled = 60\n"
        << "finetune = true\n"
        << "seeds = 3,5,9\n"
        << "hidden = 64,32\n"
        << "ema_alpha = 0.95\n"
        << "\n";
  }
  ExperimentConfig cfg = ExperimentConfig::from_file(path);
  REQUIRE(cfg.dataset == "mini");
  REQUIRE(cfg.noise == "diverse");
  REQUIRE(cfg.strategies == std::vector<Strategy>{Strategy::conf, Strategy::lhd});
  REQUIRE(cfg.rounds == 4);
  REQUIRE(cfg.k == 25);
  REQUIRE(cfg.init_labeled == 60);
  REQUIRE(cfg.use_finetune);
  REQUIRE(cfg.seeds == std::vector<std::uint64_t>{3, 5, 9});
  REQUIRE(cfg.hidden == std::vector<int>{64, 32});
  REQUIRE(cfg.ema_alpha == 0.95);

  cfg.apply_kv("k", "40");
  REQUIRE(cfg.k == 40);
  REQUIRE_THROWS_AS(cfg.apply_kv("nonsense", "1"), ConfigError);
  REQUIRE_THROWS_AS(cfg.apply_kv("k", "not_a_number"), ConfigError);
  REQUIRE_THROWS_AS(ExperimentConfig::from_file("/no/such/file.cfg"), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("config validation rejects inconsistent setups") {
  ExperimentConfig cfg = tiny_config();
  cfg.dataset = "moons";
  cfg.noise = "blank";
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  ExperimentConfig cfg2 = tiny_config();
  cfg2.rounds = 0;
  REQUIRE_THROWS_AS(cfg2.validate(), ConfigError);

  ExperimentConfig cfg3 = tiny_config();
  cfg3.init_labeled = 100000;  // pool cannot cover init + k * rounds
  REQUIRE_THROWS_AS(build_dataset(cfg3, 1), Error);

  ExperimentConfig cfg4 = tiny_config();
  cfg4.rounds = 500;  // k * rounds exceeds the pool
  REQUIRE_THROWS_AS(build_dataset(cfg4, 1), ConfigError);
}

TEST_CASE("pool text format: save/load round-trip is exact") {
  ExperimentConfig cfg = tiny_config();
  BuiltData built = build_dataset(cfg, 77);
  const std::string path = std::filesystem::temp_directory_path() / "hetal_pool_test.txt";
  save_pool(built.pool, path);
  DataPool loaded = load_pool(path);

  REQUIRE(loaded.size() == built.pool.size());
  REQUIRE(loaded.n_classes == built.pool.n_classes);
  REQUIRE((loaded.features - built.pool.features).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(loaded.labels == built.pool.labels);
  REQUIRE(loaded.is_noisy == built.pool.is_noisy);
  REQUIRE(loaded.labeled_idx == built.pool.labeled_idx);
  REQUIRE(loaded.unlabeled_idx == built.pool.unlabeled_idx);
  std::filesystem::remove(path);
}

TEST_CASE("pool text format: malformed files raise IoError") {
  const std::string path = std::filesystem::temp_directory_path() / "hetal_bad_pool.txt";
  {
    std::ofstream out(path);
    out << "3 2 4\n1.0 2.0 0 0 L\n";  // truncated: promises 3 rows
  }
  REQUIRE_THROWS_AS(load_pool(path), IoError);
  {
    std::ofstream out(path);
    out << "1 2 4\n1.0 2.0 0 0 X\n";  // bad partition tag
  }
  REQUIRE_THROWS_AS(load_pool(path), IoError);
  REQUIRE_THROWS_AS(load_pool("/no/such/pool.txt"), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("xml checker sanity") {
  REQUIRE(xml_well_formed("<?xml version=\"1.0\"?>\n<a><b x=\"1\"/><c>t</c></a>"));
  REQUIRE_FALSE(xml_well_formed("<a><b></a></b>"));
  REQUIRE_FALSE(xml_well_formed("<a>"));
  REQUIRE_FALSE(xml_well_formed("<a attr=\"unterminated></a>"));
}
