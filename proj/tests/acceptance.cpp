// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero when anything fails. Criteria 7-10 run the full pipeline on the
// synthetic smoke corpus with the deterministic simulated judge.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rexplain/advantage.hpp"
#include "rexplain/corpus.hpp"
#include "rexplain/evaluate.hpp"
#include "rexplain/metrics.hpp"
#include "rexplain/pareto.hpp"
#include "rexplain/policy.hpp"
#include "rexplain/prompts.hpp"
#include "rexplain/rewards.hpp"
#include "rexplain/rng.hpp"
#include "rexplain/sampler.hpp"
#include "rexplain/trainer.hpp"

using namespace rexplain;

namespace {

int failures = 0;

void report(int index, bool pass, const std::string& name, const std::string& detail) {
  std::printf("[%2d/10] %s  %s (%s)\n", index, pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  if (!pass) ++failures;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

// ---------------------------------------------------------------- criterion 1

double objective_at(const GradientSet& grads, const std::vector<double>& w) {
  double obj = 0.0;
  for (std::size_t k = 0; k < grads[0].size(); ++k) {
    double g = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) g += w[i] * grads[i][k];
    obj += g * g;
  }
  return obj;
}

double grid_minimum(const GradientSet& grads, double floor) {
  const std::size_t m = grads.size();
  double best = std::numeric_limits<double>::max();
  if (m == 2) {
    for (int i = 0; i <= 100; ++i) {
      const double w0 = i * 0.01;
      if (w0 < floor - 1e-12 || 1.0 - w0 < floor - 1e-12) continue;
      best = std::min(best, objective_at(grads, {w0, 1.0 - w0}));
    }
  } else {
    for (int i = 0; i <= 100; ++i) {
      for (int j = 0; i + j <= 100; ++j) {
        const double w0 = i * 0.01, w1 = j * 0.01, w2 = 1.0 - w0 - w1;
        if (w0 < floor - 1e-12 || w1 < floor - 1e-12 || w2 < floor - 1e-12) continue;
        best = std::min(best, objective_at(grads, {w0, w1, w2}));
      }
    }
  }
  return best;
}

void criterion_1_solver_optimality() {
  Rng rng(1001);
  const double start = now_seconds();
  bool ok = true;
  std::string why = "1000 instances";
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const std::size_t m = 2 + trial % 2;
    GradientSet grads(m, std::vector<double>(8));
    for (auto& g : grads) {
      for (double& x : g) x = rng.uniform(-1.0, 1.0);
    }
    const bool floored = trial % 2 == 1;
    const double floor = floored ? 0.2 : 0.0;
    const auto constraints =
        floored ? one_hot_floors(m, 0.2) : std::vector<PreferenceConstraint>{};

    const ParetoSolution s = solve_weights(grads, constraints);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum += s.weights[i];
      if (s.weights[i] < floor - 1e-8) {
        ok = false;
        why = "floor violated at trial " + std::to_string(trial);
      }
    }
    if (std::abs(sum - 1.0) > 1e-8) {
      ok = false;
      why = "simplex violated at trial " + std::to_string(trial);
    }
    const double oracle = grid_minimum(grads, floor);
    if (s.objective > oracle + 1e-6) {
      ok = false;
      why = "objective " + fmt(s.objective) + " > grid " + fmt(oracle) + " at trial " +
            std::to_string(trial);
    }
  }
  const double elapsed = now_seconds() - start;
  if (elapsed >= 10.0) {
    ok = false;
    why = "too slow";
  }
  report(1, ok, "pareto solver optimality vs 0.01-grid oracle",
         why + ", " + fmt(elapsed) + " s");
}

// ---------------------------------------------------------------- criterion 2

void criterion_2_theorem_properties() {
  Rng rng(1002);
  bool ok = true;
  std::string why = "200 random + 20 opposing instances";
  for (int trial = 0; trial < 200 && ok; ++trial) {
    GradientSet grads(3, std::vector<double>(8));
    for (auto& g : grads) {
      for (double& x : g) x = rng.uniform(-1.0, 1.0);
    }
    const ParetoSolution s = solve_weights(grads);
    if (s.certificate.kind == CertificateKind::stationary) continue;
    for (double ip : s.certificate.inner_products) {
      if (ip < s.objective - 1e-6) {
        ok = false;
        why = "min-norm inequality violated at trial " + std::to_string(trial) + ": " +
              fmt(ip) + " < " + fmt(s.objective);
      }
    }
  }
  for (int trial = 0; trial < 20 && ok; ++trial) {
    std::vector<double> g1(8);
    for (double& x : g1) x = rng.uniform(-1.0, 1.0);
    std::vector<double> g2(8);
    for (std::size_t i = 0; i < 8; ++i) g2[i] = -g1[i];
    const ParetoSolution s = solve_weights({g1, g2});
    if (s.objective > 1e-10 || s.certificate.kind != CertificateKind::stationary) {
      ok = false;
      why = "opposing gradients not certified stationary (obj " + fmt(s.objective) + ")";
    }
  }
  report(2, ok, "theorem conditions: min-norm inequality + stationarity", why);
}

// ---------------------------------------------------------------- criterion 3

Vocabulary small_vocab(int extra) {
  Vocabulary vocab;
  vocab.tokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (int i = 0; i < extra; ++i) vocab.tokens.push_back("w" + std::to_string(i));
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
    vocab.index[vocab.tokens[i]] = static_cast<int>(i);
  }
  return vocab;
}

double grad_check(RecurrentPolicy& policy, const std::vector<double>& analytic,
                  const std::function<double()>& value) {
  std::vector<double>& params = policy.mutable_params();
  double worst = 0.0;
  const double eps = 1e-5;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = value();
    params[i] = saved - eps;
    const double down = value();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

void criterion_3_gradient_correctness() {
  Rng rng(1003);
  bool ok = true;
  double worst = 0.0;
  std::string which = "all four objectives";

  for (int trial = 0; trial < 20 && ok; ++trial) {
    RecurrentPolicy policy(small_vocab(8 + static_cast<int>(rng.uniform_int(9))), 3, 3,
                           2 + static_cast<int>(rng.uniform_int(3)), 5000 + trial);

    std::vector<TrainExample> batch(3);
    for (auto& ex : batch) {
      ex.user = static_cast<int>(rng.uniform_int(3));
      ex.item = static_cast<int>(rng.uniform_int(3));
      ex.rating = rng.uniform(1.0, 5.0);
      const std::size_t len = 1 + rng.uniform_int(6);
      for (std::size_t t = 0; t < len; ++t) {
        ex.tokens.push_back(4 + static_cast<int>(rng.uniform_int(policy.vocab().size() - 4)));
      }
    }

    // mean-squared rating loss
    double err = grad_check(policy, policy.mse_loss(batch).grad,
                            [&] { return policy.mse_loss(batch).loss; });
    worst = std::max(worst, err);
    if (err > 1e-4) {
      ok = false;
      which = "rating loss";
      break;
    }

    // teacher-forced negative log-likelihood
    err = grad_check(policy, policy.nll_loss(batch).grad,
                     [&] { return policy.nll_loss(batch).loss; });
    worst = std::max(worst, err);
    if (err > 1e-4) {
      ok = false;
      which = "nll loss";
      break;
    }

    // sequence log-probability
    std::vector<double> grad(policy.param_count(), 0.0);
    policy.log_prob_accumulate(batch[0].user, batch[0].item, batch[0].tokens, 1.0, grad);
    err = grad_check(policy, grad, [&] {
      return policy.sequence_log_prob(batch[0].user, batch[0].item, batch[0].tokens);
    });
    worst = std::max(worst, err);
    if (err > 1e-4) {
      ok = false;
      which = "sequence log-prob";
      break;
    }

    // clipped importance-weighted surrogate
    ReplayBuffer buffer;
    Rng sample_rng(7000 + trial);
    for (int p = 0; p < 3; ++p) {
      const int user = static_cast<int>(sample_rng.uniform_int(3));
      const int item = static_cast<int>(sample_rng.uniform_int(3));
      for (int j = 0; j < 3; ++j) {
        const SampledExplanation s = policy.sample(user, item, 1.0, sample_rng);
        Trajectory t;
        t.user_id = "u" + std::to_string(user) + std::to_string(p);
        t.item_id = "v" + std::to_string(item);
        t.user = user;
        t.item = item;
        t.tokens = s.tokens;
        t.rewards = RewardVector::multi(1 + sample_rng.uniform_int(3),
                                        1 + sample_rng.uniform_int(3));
        t.logp_behavior = s.log_prob;
        buffer.append(std::move(t));
      }
    }
    group_advantages(buffer);
    std::vector<double> nudged = policy.params();
    for (double& p : nudged) p += sample_rng.uniform(-0.02, 0.02);
    policy.set_params(nudged);

    err = grad_check(policy, surrogate_and_grad(buffer, policy, 0, 0.2).grad,
                     [&] { return surrogate_and_grad(buffer, policy, 0, 0.2).value; });
    worst = std::max(worst, err);
    if (err > 1e-4) {
      ok = false;
      which = "clipped surrogate";
      break;
    }
  }
  report(3, ok, "analytic gradients vs central finite differences",
         which + ", worst rel err " + fmt(worst));
}

// ---------------------------------------------------------------- criterion 4

Corpus profile_corpus(const std::vector<std::size_t>& counts, std::size_t spare_per_cat) {
  Corpus corpus;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c] + spare_per_cat; ++i) {
      corpus.items.push_back({"c" + std::to_string(c) + "_" + std::to_string(i), "t", "d",
                              "cat" + std::to_string(c), {"x"}});
    }
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      corpus.interactions.push_back(
          {"u", "c" + std::to_string(c) + "_" + std::to_string(i), 3.0, "fine x"});
    }
  }
  corpus.rebuild_indexes();
  return corpus;
}

void criterion_4_sampler_distribution() {
  bool ok = true;
  std::string why = "N=(0,6) and 5 random profiles, 1e5 draws each";
  Rng meta(1004);

  std::vector<std::vector<std::size_t>> profiles = {{0, 6}};
  for (int r = 0; r < 5; ++r) {
    std::vector<std::size_t> counts(2 + meta.uniform_int(3));
    for (auto& c : counts) c = meta.uniform_int(12);
    profiles.push_back(counts);
  }

  for (std::size_t pi = 0; pi < profiles.size() && ok; ++pi) {
    const Corpus corpus = profile_corpus(profiles[pi], 4);
    const std::size_t user = corpus.user_index.count("u") ? corpus.user_index.at("u") : 0;
    if (corpus.users.empty()) {
      ok = false;
      why = "empty fixture";
      break;
    }
    const auto analytic = category_probs(category_profile(corpus, user)).probs;

    std::set<std::string> observed;
    for (std::size_t idx : corpus.users[user].history) {
      observed.insert(corpus.interactions[idx].item_id);
    }

    Rng rng(2000 + pi);
    const std::size_t draws = 100000;
    std::vector<std::size_t> hits(analytic.size(), 0);
    for (const auto& [u, item] : sample_unobserved(corpus, user, draws, rng)) {
      if (observed.contains(corpus.items[item].item_id)) {
        ok = false;
        why = "observed pair emitted";
        break;
      }
      hits[corpus.category_of_item(item)]++;
    }
    for (std::size_t c = 0; c < analytic.size() && ok; ++c) {
      const double freq = static_cast<double>(hits[c]) / static_cast<double>(draws);
      if (std::abs(freq - analytic[c]) > 0.01) {
        ok = false;
        why = "profile " + std::to_string(pi) + " category " + std::to_string(c) + ": |" +
              fmt(freq) + " - " + fmt(analytic[c]) + "| > 0.01";
      }
    }
  }
  report(4, ok, "difficulty-aware sampler matches the analytic distribution", why);
}

// ---------------------------------------------------------------- criterion 5

void criterion_5_advantage_invariants() {
  Rng rng(1005);
  bool ok = true;
  std::string why = "1000 random groups";
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const std::size_t j = 2 + rng.uniform_int(8);
    const double shift = rng.uniform(-5, 5);
    ReplayBuffer base, shifted;
    for (std::size_t i = 0; i < j; ++i) {
      Trajectory t;
      t.user_id = "u";
      t.item_id = "v";
      t.tokens = {4, 2};
      t.logp_behavior = -1.0;
      const double info = rng.uniform(1, 3);
      const double persv = rng.uniform(1, 3);
      t.rewards = RewardVector::multi(info, persv);
      base.append(t);
      t.rewards = RewardVector::multi(info + shift, persv + shift);
      shifted.append(t);
    }
    group_advantages(base);
    group_advantages(shifted);

    double sum0 = 0.0, sum1 = 0.0;
    for (std::size_t i = 0; i < j; ++i) {
      const auto& a = *base.entries()[i].advantages;
      const auto& b = *shifted.entries()[i].advantages;
      sum0 += a[0];
      sum1 += a[1];
      if (std::abs(a[0] - b[0]) > 1e-9 || std::abs(a[1] - b[1]) > 1e-9) {
        ok = false;
        why = "shift invariance violated at trial " + std::to_string(trial);
      }
    }
    if (std::abs(sum0) > 1e-9 || std::abs(sum1) > 1e-9) {
      ok = false;
      why = "advantage sum " + fmt(std::max(std::abs(sum0), std::abs(sum1))) + " at trial " +
            std::to_string(trial);
    }
  }
  report(5, ok, "group advantages: zero-sum and shift invariance", why);
}

// ---------------------------------------------------------------- criterion 6

void criterion_6_metric_fixtures() {
  bool ok = true;
  std::string why = "10 fixtures";
  int fixture = 0;
  auto expect = [&](double actual, double expected, const char* name) {
    ++fixture;
    if (std::abs(actual - expected) > 1e-9) {
      ok = false;
      why = std::string(name) + " (fixture " + std::to_string(fixture) + "): " + fmt(actual) +
            " != " + fmt(expected);
    }
  };

  const Tokens cand = {"the", "cream", "is", "nice"};
  const Tokens ref = {"the", "cream", "feels", "great", "on", "skin"};

  expect(rouge_n(ref, ref, 1).f1, 1.0, "rouge1 identical");
  expect(rouge_n(cand, {"metal", "cold"}, 1).f1, 0.0, "rouge1 disjoint");
  expect(rouge_n(cand, ref, 1).precision, 0.5, "rouge1 precision");
  expect(rouge_n(cand, ref, 1).f1, 0.4, "rouge1 f1 hand fixture");
  expect(rouge_l({"a", "b", "c", "d"}, {"a", "x", "c", "d"}).precision, 0.75, "rougeL lcs");
  expect(bleu(ref, ref), 1.0, "bleu identical");
  const Tokens mixed = {"the", "cream", "is", "nice", "on", "skin"};
  expect(bleu(mixed, ref),
         std::pow((4.0 / 6.0) * (2.0 / 5.0) * (1.0 / 5.0) * (1.0 / 4.0), 0.25),
         "bleu hand fixture");

  FmrSample hit{{"love", "the", "scent"}, {"nice", "scent"}, {{"scent"}}};
  FmrSample miss{{"plain", "words"}, {"nice", "scent"}, {{"scent"}}};
  expect(fmr({hit, hit, miss, miss}), 0.5, "fmr half");
  expect(fmr({miss, miss}), 0.0, "fmr zero");
  expect(spearman({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, "spearman hand fixture");

  report(6, ok, "metric fixtures vs hand-computed oracles", why);
}

// ------------------------------------------------------- criteria 7, 8, 9, 10

struct TrendResults {
  std::string main_json;
  std::string sweep_json;
  std::string budget_json;
  double baseline_combined = 0.0;
  double final_combined = 0.0;
  double fmr_before = 0.0;
  double fmr_after = 0.0;
  double main_seconds = 0.0;
  SweepReport sweep;
  std::vector<double> budget_combined;
};

TrainConfig smoke_config() {
  TrainConfig config;
  config.iterations = 3;
  config.epochs = 2;
  config.explore = 5;
  config.clip = 0.2;
  config.lr = 1e-3;
  config.batch = 32;
  config.sample_budget = 400;
  config.probe_pairs = 100;
  config.seed = 7;
  config.pretrain.epochs = 60;
  config.pretrain.lr = 1e-3;
  config.pretrain.batch = 16;
  config.pretrain.seed = 7;
  return config;
}

TrendResults run_trend_suite() {
  TrendResults results;

  const Corpus full = gen_synthetic(200, 100, 5, 7);
  auto [train, test] = split_leave_last(full);

  const SimulatedProvider reward(default_persuasion_words());
  const LocalHashEmbedding embedding(64);
  const auto prototypes = load_prototypes(std::filesystem::path(REXPLAIN_ASSETS_DIR) /
                                          "prompt_prototypes.jsonl");
  Providers providers;
  providers.reward = &reward;
  providers.embedding = &embedding;
  providers.prototypes = &prototypes;

  const TrainConfig config = smoke_config();

  // pretrained base shared by the main run, the sweep and the budget trend
  Vocabulary vocab = build_vocab(train);
  RecurrentPolicy pretrained(std::move(vocab), 200, 100, 16, config.seed);
  pretrained.pretrain(make_examples(train, pretrained.vocab()), config.pretrain);

  const double start = now_seconds();
  Trainer trainer(full, train, test, config, providers);
  std::unique_ptr<Policy> main_policy = pretrained.clone();
  const TrainOutcome outcome = trainer.train(*main_policy, /*pretrain_first=*/false);
  results.main_seconds = now_seconds() - start;

  results.main_json = outcome_to_json(outcome);
  results.baseline_combined = outcome.baseline_probe.mean_combined;
  results.final_combined = outcome.iterations.back().probe.mean_combined;
  results.fmr_before = evaluate_on_test(full, test, pretrained).fmr;
  results.fmr_after =
      evaluate_on_test(full, test, *main_policy).fmr;

  results.sweep = sweep_beta(full, train, test, config, providers, pretrained, 0.8, 0.1);
  results.sweep_json = sweep_to_json(results.sweep);

  for (const std::size_t budget : {std::size_t{100}, std::size_t{200}, std::size_t{400}}) {
    TrainConfig bc = config;
    bc.sample_budget = budget;
    Trainer bt(full, train, test, bc, providers);
    std::unique_ptr<Policy> policy = pretrained.clone();
    bt.train(*policy, /*pretrain_first=*/false);
    results.budget_combined.push_back(bt.evaluate_probe(*policy).mean_combined);
  }
  {
    std::ostringstream out;
    out.precision(17);
    for (double v : results.budget_combined) out << v << "\n";
    results.budget_json = out.str();
  }
  return results;
}

void criteria_7_to_10() {
  const TrendResults first = run_trend_suite();

  {
    const bool improved =
        first.final_combined >= 1.05 * first.baseline_combined && first.baseline_combined > 0;
    const bool fmr_kept = first.fmr_after >= first.fmr_before - 1e-12;
    const bool fast = first.main_seconds < 300.0;
    report(7, improved && fmr_kept && fast, "probe reward +5% and FMR kept at desk scale",
           "combined " + fmt(first.baseline_combined) + " -> " + fmt(first.final_combined) +
               ", fmr " + fmt(first.fmr_before) + " -> " + fmt(first.fmr_after) + ", " +
               fmt(first.main_seconds) + " s");
  }

  {
    const SweepRow& persv_end = first.sweep.rows.front();  // beta_info = 0
    const SweepRow& info_end = first.sweep.rows.back();    // beta_info = 0.8
    const double info_at_info_end = info_end.probe.mean_perspectives[0];
    const double info_at_persv_end = persv_end.probe.mean_perspectives[0];
    const double persv_at_info_end = info_end.probe.mean_perspectives[1];
    const double persv_at_persv_end = persv_end.probe.mean_perspectives[1];
    const bool ok = info_at_info_end >= info_at_persv_end &&
                    persv_at_persv_end >= persv_at_info_end;
    report(8, ok, "preference sweep endpoints do not dominate each other",
           "info " + fmt(info_at_persv_end) + " vs " + fmt(info_at_info_end) + ", persv " +
               fmt(persv_at_persv_end) + " vs " + fmt(persv_at_info_end));
  }

  {
    const auto& b = first.budget_combined;
    const bool ok = b.size() == 3 && b[0] <= b[1] + 1e-12 && b[1] <= b[2] + 1e-12;
    report(9, ok, "probe reward non-decreasing over budgets {100, 200, 400}",
           fmt(b[0]) + ", " + fmt(b[1]) + ", " + fmt(b[2]));
  }

  {
    const TrendResults second = run_trend_suite();
    const bool ok = first.main_json == second.main_json &&
                    first.sweep_json == second.sweep_json &&
                    first.budget_json == second.budget_json;
    report(10, ok, "criteria 7-9 reports byte-identical across reruns",
           ok ? "all three reports match" : "reports differ");
  }
}

}  // namespace

int main() {
  criterion_1_solver_optimality();
  criterion_2_theorem_properties();
  criterion_3_gradient_correctness();
  criterion_4_sampler_distribution();
  criterion_5_advantage_invariants();
  criterion_6_metric_fixtures();
  criteria_7_to_10();

  if (failures > 0) {
    std::printf("\n%d criterion(s) FAILED\n", failures);
    return 1;
  }
  std::printf("\nall 10 criteria passed\n");
  return 0;
}
