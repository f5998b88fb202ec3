#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rexplain/advantage.hpp"
#include "rexplain/corpus.hpp"
#include "rexplain/pareto.hpp"
#include "rexplain/policy.hpp"
#include "rexplain/prompts.hpp"
#include "rexplain/rewards.hpp"

namespace rexplain {

struct TrainConfig {
  int iterations = 3;  // T
  int epochs = 2;      // E
  int explore = 5;     // J
  double clip = 0.2;   // epsilon
  double lr = 1e-3;    // gamma
  int batch = 32;      // update minibatch

  std::size_t sample_budget = 400;         // unobserved pairs per iteration
  std::size_t observed_per_iteration = 0;  // 0 = every training pair
  double explore_temperature = 1.0;
  RewardMode reward_mode = RewardMode::multi_perspective;
  double aux_rating_weight = 0.0;  // optional rating-loss term, off by default
  std::vector<PreferenceConstraint> constraints;  // empty = one-hot floors 0.2

  std::size_t top_k = 5;    // retrieved history size
  std::size_t clusters = 5; // Y
  std::size_t probe_pairs = 100;

  std::uint64_t seed = 7;
  PretrainConfig pretrain;
  std::filesystem::path out_dir;  // empty = no checkpoints/report files
};

struct Providers {
  const RewardProvider* reward = nullptr;
  const EmbeddingProvider* embedding = nullptr;
  const std::vector<PromptPrototype>* prototypes = nullptr;
  // When set, customized few-shot examples are requested from this endpoint;
  // otherwise the cluster prototype is used directly.
  const ChatClient* fewshot_client = nullptr;
};

// Mean provider scores of greedy decodes over the fixed probe pairs.
struct ProbeReport {
  std::vector<double> mean_perspectives;  // {info, persv} or {holistic}
  double mean_combined = 0.0;             // mean over perspectives
};

struct IterationReport {
  int iteration = 0;
  std::size_t buffer_size = 0;
  std::size_t pairs_collected = 0;
  std::size_t rewards_dropped = 0;
  std::size_t singleton_groups_dropped = 0;
  // [epoch][perspective] mean surrogate value over the epoch's steps.
  std::vector<std::vector<double>> surrogate_per_epoch;
  // [step][perspective] solved objective weights, in step order.
  std::vector<std::vector<double>> omega_per_step;
  ProbeReport probe;
};

struct TrainOutcome {
  ProbeReport baseline_probe;  // pretrained policy, before any RL iteration
  std::vector<IterationReport> iterations;
  PretrainStats pretrain;
};

// Clipped importance term on one trajectory:
// rho = exp(clamp(logp_new - logp_old, +-20)),
// value = min(rho * A, clip(rho, 1-eps, 1+eps) * A).
// d_dlogp_new follows the unclipped branch when it attains the min (ties
// included) and is zero when the clipped branch is strictly active or the
// log-ratio clamp binds.
struct ClippedTerm {
  double value = 0.0;
  double d_dlogp_new = 0.0;
};
ClippedTerm clipped_term(double logp_new, double logp_old, double advantage, double clip);

struct SurrogateResult {
  double value = 0.0;
  std::vector<double> grad;
};

// Mean clipped term over the given trajectories for every perspective at
// once; the per-trajectory backward pass is shared across perspectives.
std::vector<SurrogateResult> surrogates_and_grads(const ReplayBuffer& buffer,
                                                  const std::vector<std::size_t>& indices,
                                                  const Policy& policy, double clip);

// Single-perspective view over the whole buffer.
SurrogateResult surrogate_and_grad(const ReplayBuffer& buffer, const Policy& policy,
                                   std::size_t perspective, double clip);

class Trainer {
public:
  // `full` provides item/user index space; `train`/`test` are the leave-last
  // split halves. All three must outlive the trainer.
  Trainer(const Corpus& full, const Corpus& train, const Corpus& test, TrainConfig config,
          Providers providers);

  // Phase I: frozen behavior policy explores J explanations per pair over
  // the observed batch plus difficulty-aware unobserved samples; rewards are
  // judged and replaced by group advantages. Pairs run in parallel; results
  // land in per-pair slots so the buffer order is independent of scheduling.
  ReplayBuffer collect(const Policy& behavior, int iteration, IterationReport& report) const;

  // Phase II: E epochs of minibatch ascent along the Pareto-combined
  // surrogate gradient.
  void update(Policy& policy, const ReplayBuffer& buffer, int iteration,
              IterationReport& report) const;

  // The full loop: optional pretrain, then T x (collect, update, swap).
  TrainOutcome train(Policy& policy, bool pretrain_first = true) const;

  ProbeReport evaluate_probe(const Policy& policy) const;

  const std::vector<std::pair<int, int>>& probe_set() const { return probe_set_; }
  const TrainConfig& config() const { return config_; }

private:
  struct PairContext;
  void build_context(int user, int item, ScoringContext& ctx) const;

  const Corpus& full_;
  const Corpus& train_;
  const Corpus& test_;
  TrainConfig config_;
  Providers providers_;

  std::vector<PreferenceConstraint> constraints_;
  std::vector<int> user_cluster_;                  // per user index
  std::vector<EmbeddingVector> history_vecs_;      // per train interaction
  std::vector<EmbeddingVector> item_vecs_;         // per item (target text)
  std::vector<std::pair<int, int>> probe_set_;     // (user, item) test pairs
};

struct SweepRow {
  double beta_info = 0.0;
  double beta_persv = 0.0;
  ProbeReport probe;
};

struct SweepReport {
  std::vector<SweepRow> rows;
};

// Pareto-front protocol: beta_info + beta_persv = total, beta_info stepped
// from 0 to total. Every run starts from the same pretrained policy.
SweepReport sweep_beta(const Corpus& full, const Corpus& train, const Corpus& test,
                       const TrainConfig& base, const Providers& providers,
                       const Policy& pretrained, double total = 0.8, double step = 0.1);

// Canonical JSON forms (stable key order, exact doubles) used for the
// on-disk reports; identical runs produce identical bytes.
std::string report_to_json(const IterationReport& report);
std::string outcome_to_json(const TrainOutcome& outcome);
std::string sweep_to_json(const SweepReport& report);

}  // namespace rexplain
