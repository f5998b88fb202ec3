#include "rexplain/cli.hpp"

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rexplain/error.hpp"
#include "rexplain/evaluate.hpp"
#include "rexplain/log.hpp"

namespace rexplain {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ProviderBundle make_providers(const AppConfig& config) {
  ProviderBundle bundle;

  if (config.provider.embedding_kind == EmbeddingKind::remote) {
    bundle.embedding = std::make_unique<RemoteEmbedding>(config.provider.embedding);
  } else {
    bundle.embedding = std::make_unique<LocalHashEmbedding>(config.provider.local_embedding_dim);
  }

  if (config.provider.kind == ProviderKind::remote) {
    bundle.reward = std::make_unique<RemoteProvider>(config.provider.chat,
                                                     config.train.reward_mode);
    if (config.provider.remote_fewshot) {
      bundle.fewshot = std::make_unique<ChatClient>(config.provider.chat);
    }
  } else {
    bundle.reward = std::make_unique<SimulatedProvider>(load_lexicon(config.lexicon_path),
                                                        config.train.reward_mode);
  }

  if (std::filesystem::exists(config.prototypes_path)) {
    bundle.prototypes = load_prototypes(config.prototypes_path);
  }
  return bundle;
}

namespace {

struct CorpusBundle {
  Corpus full;
  Corpus train;
  Corpus test;
};

CorpusBundle load_and_split(const AppConfig& config) {
  CorpusBundle b;
  b.full = load_corpus(config.data_dir);
  auto [train, test] = split_leave_last(b.full);
  b.train = std::move(train);
  b.test = std::move(test);
  return b;
}

RecurrentPolicy fresh_policy(const AppConfig& config, const CorpusBundle& corpus) {
  Vocabulary vocab = build_vocab(corpus.train, config.vocab_min_freq);
  return RecurrentPolicy(std::move(vocab), static_cast<int>(corpus.full.users.size()),
                         static_cast<int>(corpus.full.items.size()), config.policy_dim,
                         config.seed, config.policy_max_len);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string probe_line(const ProbeReport& probe) {
  std::string line = "probe:";
  const char* names2[] = {" info=", " persv="};
  for (std::size_t i = 0; i < probe.mean_perspectives.size(); ++i) {
    line += probe.mean_perspectives.size() == 2 ? names2[i] : " score=";
    line += std::to_string(probe.mean_perspectives[i]);
  }
  line += " combined=" + std::to_string(probe.mean_combined);
  return line;
}

int cmd_gen_data(std::size_t users, std::size_t items, std::size_t categories,
                 std::uint64_t seed, const std::string& out_dir) {
  const Corpus corpus = gen_synthetic(users, items, categories, seed);
  save_corpus(corpus, out_dir);
  std::cout << "wrote " << corpus.users.size() << " users, " << corpus.items.size()
            << " items, " << corpus.interactions.size() << " interactions to " << out_dir
            << "\n";
  return 0;
}

int cmd_pretrain(const AppConfig& config) {
  const CorpusBundle corpus = load_and_split(config);
  RecurrentPolicy policy = fresh_policy(config, corpus);

  PretrainConfig pc = config.train.pretrain;
  if (pc.seed == 0) pc.seed = config.seed;
  const PretrainStats stats = policy.pretrain(make_examples(corpus.train, policy.vocab()), pc);

  std::filesystem::create_directories(config.out_dir);
  const auto ckpt = config.out_dir / "ckpt_pretrain.json";
  policy.save_checkpoint(ckpt);
  std::cout << "nll " << stats.nll_before << " -> " << stats.nll_after << ", mse "
            << stats.mse_before << " -> " << stats.mse_after << " over " << stats.steps
            << " steps\ncheckpoint: " << ckpt.string() << "\n";
  return 0;
}

int cmd_train(const AppConfig& config, const std::string& ckpt) {
  const CorpusBundle corpus = load_and_split(config);
  const ProviderBundle providers = make_providers(config);

  TrainConfig tc = config.train;
  tc.seed = config.seed;
  tc.out_dir = config.out_dir;
  Trainer trainer(corpus.full, corpus.train, corpus.test, tc, providers.view());

  std::unique_ptr<RecurrentPolicy> policy;
  bool pretrain_first = true;
  if (!ckpt.empty()) {
    policy = std::make_unique<RecurrentPolicy>(RecurrentPolicy::load_checkpoint(ckpt));
    pretrain_first = false;
  } else {
    policy = std::make_unique<RecurrentPolicy>(fresh_policy(config, corpus));
  }

  const TrainOutcome outcome = trainer.train(*policy, pretrain_first);
  std::filesystem::create_directories(config.out_dir);
  write_text(config.out_dir / "train_report.json", outcome_to_json(outcome));
  policy->save_checkpoint(config.out_dir / "ckpt_final.json");

  std::cout << "baseline " << probe_line(outcome.baseline_probe) << "\n";
  for (const auto& it : outcome.iterations) {
    std::cout << "iteration " << it.iteration << ": buffer=" << it.buffer_size
              << " dropped=" << it.rewards_dropped << " " << probe_line(it.probe) << "\n";
  }
  std::cout << "report: " << (config.out_dir / "train_report.json").string() << "\n";
  return 0;
}

int cmd_eval(const AppConfig& config, const std::string& ckpt) {
  const CorpusBundle corpus = load_and_split(config);
  const RecurrentPolicy policy = RecurrentPolicy::load_checkpoint(ckpt);
  const EvalReport report = evaluate_on_test(corpus.full, corpus.test, policy);

  ordered_json j;
  j["fmr"] = report.fmr;
  j["bleu"] = report.bleu;
  for (const auto& [name, score] :
       {std::pair{"rouge1", &report.rouge1}, {"rouge2", &report.rouge2},
        {"rougeL", &report.rougeL}}) {
    j[name] = {{"precision", score->precision}, {"recall", score->recall}, {"f1", score->f1}};
  }
  j["rmse"] = report.rmse;
  j["mae"] = report.mae;
  j["samples"] = report.samples;

  std::filesystem::create_directories(config.out_dir);
  write_text(config.out_dir / "eval_report.json", j.dump(2));
  std::cout << format_report_table(report);
  return 0;
}

int cmd_solve_pareto(const std::string& in_path) {
  json input;
  if (in_path.empty()) {
    try {
      input = json::parse(std::cin);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("stdin is not valid JSON: ") + e.what());
    }
  } else {
    std::ifstream in(in_path);
    if (!in) throw ConfigError("cannot open " + in_path);
    try {
      input = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(in_path + " is not valid JSON: " + e.what());
    }
  }
  if (!input.contains("grads")) throw ConfigError("input needs a \"grads\" array");
  const GradientSet grads = input["grads"].get<GradientSet>();
  std::vector<PreferenceConstraint> constraints;
  if (input.contains("constraints")) {
    for (const json& c : input["constraints"]) {
      constraints.push_back({c.at("h").get<std::vector<double>>(), c.at("beta").get<double>()});
    }
  }

  const ParetoSolution solution = solve_weights(grads, constraints);
  ordered_json out;
  out["weights"] = solution.weights;
  out["combined_gradient"] = solution.combined_gradient;
  out["objective"] = solution.objective;
  out["certificate"] = {
      {"kind", solution.certificate.kind == CertificateKind::stationary ? "stationary"
                                                                        : "descent_direction"},
      {"inner_products", solution.certificate.inner_products}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sweep_beta(const AppConfig& config, const std::string& ckpt, double total, double step) {
  const CorpusBundle corpus = load_and_split(config);
  const ProviderBundle providers = make_providers(config);

  TrainConfig tc = config.train;
  tc.seed = config.seed;

  std::unique_ptr<RecurrentPolicy> policy;
  if (!ckpt.empty()) {
    policy = std::make_unique<RecurrentPolicy>(RecurrentPolicy::load_checkpoint(ckpt));
  } else {
    policy = std::make_unique<RecurrentPolicy>(fresh_policy(config, corpus));
    PretrainConfig pc = tc.pretrain;
    if (pc.seed == 0) pc.seed = config.seed;
    policy->pretrain(make_examples(corpus.train, policy->vocab()), pc);
  }

  const SweepReport report =
      sweep_beta(corpus.full, corpus.train, corpus.test, tc, providers.view(), *policy, total,
                 step);

  std::filesystem::create_directories(config.out_dir);
  write_text(config.out_dir / "sweep_report.json", sweep_to_json(report));

  std::cout << "beta_info  beta_persv  mean_info  mean_persv\n";
  for (const SweepRow& row : report.rows) {
    std::cout << "  " << row.beta_info << "       " << row.beta_persv << "       "
              << row.probe.mean_perspectives[0] << "    " << row.probe.mean_perspectives[1]
              << "\n";
  }
  std::cout << "report: " << (config.out_dir / "sweep_report.json").string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"off-policy trainer for explainable recommendation policies"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  std::size_t users = 200, items = 100, categories = 5;
  std::uint64_t gen_seed = 7;
  std::string gen_out;
  gen->add_option("--users", users, "number of users");
  gen->add_option("--items", items, "number of items");
  gen->add_option("--categories", categories, "number of item categories");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // shared config options
  std::string config_path, data_override, out_override, ckpt_path;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  auto add_config_opts = [&](CLI::App* cmd, bool config_required = true) {
    auto* opt = cmd->add_option("--config", config_path, "config JSON file");
    if (config_required) opt->required();
    cmd->add_option("--data", data_override, "override data directory");
    cmd->add_option("--out", out_override, "override output directory");
    cmd->add_option("--seed", seed_override, "override master seed")
        ->each([&](const std::string&) { seed_given = true; });
  };

  auto* pre = app.add_subcommand("pretrain", "supervised pretraining on the observed data");
  add_config_opts(pre);

  auto* train_cmd = app.add_subcommand("train", "off-policy feedback-driven training");
  add_config_opts(train_cmd);
  train_cmd->add_option("--ckpt", ckpt_path, "pretrained checkpoint (skips pretraining)");
  std::size_t budget_override = 0;
  bool budget_given = false;
  train_cmd->add_option("--sample-budget", budget_override, "override unobserved sample budget")
      ->each([&](const std::string&) { budget_given = true; });

  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on the test split");
  add_config_opts(eval_cmd);
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint to evaluate")->required();

  auto* pareto_cmd = app.add_subcommand("solve-pareto", "solve one objective-weight instance");
  std::string pareto_in;
  pareto_cmd->add_option("--in", pareto_in, "instance JSON (default: stdin)");

  auto* sweep = app.add_subcommand("sweep-beta", "preference-floor sweep over beta");
  add_config_opts(sweep);
  sweep->add_option("--ckpt", ckpt_path, "pretrained checkpoint (skips pretraining)");
  double sweep_total = 0.8, sweep_step = 0.1;
  sweep->add_option("--total", sweep_total, "beta_info + beta_persv");
  sweep->add_option("--step", sweep_step, "beta increment");

  std::vector<const char*> argv;
  argv.push_back("rexplain");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(users, items, categories, gen_seed, gen_out);

    AppConfig config;
    if (!config_path.empty()) config = load_app_config(config_path);
    if (!data_override.empty()) config.data_dir = data_override;
    if (!out_override.empty()) config.out_dir = out_override;
    if (seed_given) config.seed = seed_override;
    if (budget_given) config.train.sample_budget = budget_override;

    if (pre->parsed()) return cmd_pretrain(config);
    if (train_cmd->parsed()) return cmd_train(config, ckpt_path);
    if (eval_cmd->parsed()) return cmd_eval(config, ckpt_path);
    if (pareto_cmd->parsed()) return cmd_solve_pareto(pareto_in);
    if (sweep->parsed()) return cmd_sweep_beta(config, ckpt_path, sweep_total, sweep_step);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rexplain
