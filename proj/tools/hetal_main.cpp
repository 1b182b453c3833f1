// Command-line front end: run active-learning experiments, generate and save
// benchmark pools, and evaluate the generalization-bound terms.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>

#include "hetal/hetal.hpp"

namespace {

struct RunFlags {
  std::string config_file;
  std::string dataset, noise, strategy, out, seeds;
  int rounds = -1, k = -1, init_labeled = -1;
  bool finetune = false;
  std::vector<std::string> extra;  // key=value overrides
};

hetal::ExperimentConfig assemble_config(const RunFlags& f) {
  hetal::ExperimentConfig cfg;
  if (!f.config_file.empty()) cfg = hetal::ExperimentConfig::from_file(f.config_file);
  if (!f.dataset.empty()) cfg.apply_kv("dataset", f.dataset);
  if (!f.noise.empty()) cfg.apply_kv("noise", f.noise);
  if (!f.strategy.empty()) cfg.apply_kv("strategy", f.strategy);
  if (f.rounds >= 0) cfg.rounds = f.rounds;
  if (f.k >= 0) cfg.k = f.k;
  if (f.init_labeled >= 0) cfg.init_labeled = f.init_labeled;
  if (f.finetune) cfg.use_finetune = true;
  if (!f.seeds.empty()) cfg.apply_kv("seeds", f.seeds);
  if (!f.out.empty()) cfg.out_dir = f.out;
  for (const auto& kv : f.extra) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw hetal::ConfigError("--set expects key=value, got " + kv);
    cfg.apply_kv(kv.substr(0, eq), kv.substr(eq + 1));
  }
  hetal::apply_augment_defaults(cfg);
  return cfg;
}

int cmd_run(const RunFlags& flags) {
  hetal::ExperimentConfig cfg = assemble_config(flags);
  auto results = hetal::run_suite(cfg);
  for (const auto& sr : results) {
    std::printf("%-8s final accuracy %.4f +- %.4f   clean fraction %.4f\n",
                hetal::to_string(sr.strategy), sr.mean_final_accuracy, sr.std_final_accuracy,
                sr.mean_clean_fraction);
  }
  if (!cfg.out_dir.empty()) std::printf("results written to %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_make_pool(const RunFlags& flags, const std::string& out_file) {
  hetal::ExperimentConfig cfg = assemble_config(flags);
  const std::uint64_t seed = cfg.seeds.front();
  hetal::BuiltData built = hetal::build_dataset(cfg, seed);
  hetal::save_pool(built.pool, out_file);
  std::printf("pool: %d examples, %d features, %d classes -> %s\n", built.pool.size(),
              built.pool.dim(), built.pool.n_classes, out_file.c_str());
  return 0;
}

int cmd_theory(int n, int s, int q, int trials, double delta, std::uint64_t seed,
               const std::string& out_dir) {
  using namespace hetal;
  const int d = 2, classes = 2;
  auto sampler = gaussian_blob_sampler(n, d, classes, 2.0, 0.6);

  // Train a small reference model on one clean draw.
  ModelConfig mc;
  mc.layer_widths = {d, 16, classes};
  mc.seed = derive_seed(seed, 0x11);
  ModelState model = init_model(mc);
  EmaState ema = init_ema(model, 0.99);
  Eigen::MatrixXd x;
  std::vector<int> y;
  sampler(derive_seed(seed, 0x22), x, y);
  Rng rng(derive_seed(seed, 0x33));
  train(model, ema, mc, x, y, 200, 16, 1e-3, rng);

  std::vector<int> half(n / 2);
  for (int i = 0; i < n / 2; ++i) half[i] = i;
  auto corruption = CorruptionSpec::uniform_relabel(n, half, classes, derive_seed(seed, 0x44));

  TopQSpec spec = TopQSpec::make(n, std::min(s, n), std::min(q, s));
  ThetaSpec theta;
  theta.config = ModelConfig{{d, classes}, Activation::relu, 0.0, 0};
  theta.norm_caps = {5.0};
  theta.restarts = 5;
  theta.steps = 300;
  theta.lr = 0.1;

  GapReport rep = generalization_gap_report(model, mc, sampler, x, y, corruption, spec, theta,
                                            trials, delta, LossKind::cross_entropy, seed);
  std::fputs(rep.table().c_str(), stdout);

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    std::ofstream txt(out_dir + "/gap_report.txt");
    txt << rep.table();
    std::ofstream csv(out_dir + "/q_trials.csv");
    csv << "trial,q_value\n";
    for (std::size_t i = 0; i < rep.q_trials.size(); ++i)
      csv << i << "," << format_double(rep.q_trials[i]) << "\n";
    std::printf("report written to %s\n", out_dir.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"active learning under heteroskedastic label noise"};
  app.require_subcommand(1);

  RunFlags flags;
  auto add_common = [&flags](CLI::App* cmd) {
    cmd->add_option("--config", flags.config_file, "flat key=value config file");
    cmd->add_option("--dataset", flags.dataset, "moons | mini");
    cmd->add_option("--noise", flags.noise, "none | blank | diverse | class");
    cmd->add_option("--strategy", flags.strategy,
                    "comma list of rand|conf|marg|bald|coreset|badge|lhd");
    cmd->add_option("--rounds", flags.rounds, "acquisition rounds");
    cmd->add_option("--k", flags.k, "batch size per round");
    cmd->add_option("--init-labeled", flags.init_labeled, "initially labeled examples");
    cmd->add_flag("--finetune", flags.finetune, "enable pseudo-label fine-tuning");
    cmd->add_option("--seeds", flags.seeds, "comma list of seeds");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--set", flags.extra, "extra key=value overrides")->take_all();
  };

  CLI::App* run = app.add_subcommand("run", "run an active-learning experiment");
  add_common(run);

  CLI::App* mk = app.add_subcommand("make-pool", "generate a pool and save it as text");
  add_common(mk);
  std::string pool_file = "pool.txt";
  mk->add_option("--pool-out", pool_file, "pool file path");

  CLI::App* theo = app.add_subcommand("theory", "evaluate the generalization-bound terms");
  int tn = 40, ts = 8, tq = 2, ttrials = 8;
  double tdelta = 0.1;
  std::uint64_t tseed = 1;
  std::string tout;
  theo->add_option("--n", tn, "dataset size per trial");
  theo->add_option("--s", ts, "minibatch size");
  theo->add_option("--q", tq, "top-q count");
  theo->add_option("--trials", ttrials, "Monte-Carlo trials");
  theo->add_option("--delta", tdelta, "confidence level delta");
  theo->add_option("--seed", tseed, "base seed");
  theo->add_option("--out", tout, "output directory for report files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(flags);
    if (mk->parsed()) return cmd_make_pool(flags, pool_file);
    if (theo->parsed()) return cmd_theory(tn, ts, tq, ttrials, tdelta, tseed, tout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
