#include "rexplain/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>

#include <json.hpp>

#include "rexplain/error.hpp"
#include "rexplain/log.hpp"
#include "rexplain/parallel.hpp"
#include "rexplain/sampler.hpp"

namespace rexplain {

using ordered_json = nlohmann::ordered_json;

ClippedTerm clipped_term(double logp_new, double logp_old, double advantage, double clip) {
  if (!std::isfinite(logp_old)) throw Error("clipped_term: logp_old must be finite");
  const double dlog = logp_new - logp_old;
  const double clamped = std::clamp(dlog, -20.0, 20.0);
  const double rho = std::exp(clamped);
  const double clipped_rho = std::clamp(rho, 1.0 - clip, 1.0 + clip);

  const double unclipped = rho * advantage;
  const double clipped = clipped_rho * advantage;

  ClippedTerm out;
  out.value = std::min(unclipped, clipped);
  const bool unclipped_active = unclipped <= clipped;  // ties follow the unclipped branch
  const bool clamp_binding = dlog != clamped;
  out.d_dlogp_new = unclipped_active && !clamp_binding ? rho * advantage : 0.0;
  return out;
}

std::vector<SurrogateResult> surrogates_and_grads(const ReplayBuffer& buffer,
                                                  const std::vector<std::size_t>& indices,
                                                  const Policy& policy, double clip) {
  if (indices.empty()) throw Error("surrogates_and_grads: no trajectories");
  const Trajectory& first = buffer.entries()[indices.front()];
  if (!first.advantages) throw Error("surrogates_and_grads: advantages not computed");
  const std::size_t n_persp = first.advantages->size();
  const std::size_t n_params = policy.param_count();
  const double inv_n = 1.0 / static_cast<double>(indices.size());

  constexpr std::size_t grain = 8;
  const std::size_t chunks = par::chunk_count(indices.size(), grain);
  // partial[c] holds per-perspective grads back to back, then the values.
  std::vector<std::vector<double>> partial_grads(chunks);
  std::vector<std::vector<double>> partial_values(chunks);

  par::chunked(indices.size(), grain, [&](std::size_t begin, std::size_t end, std::size_t c) {
    partial_grads[c].assign(n_persp * n_params, 0.0);
    partial_values[c].assign(n_persp, 0.0);
    std::vector<double> logp_grad(n_params);
    for (std::size_t at = begin; at < end; ++at) {
      const Trajectory& t = buffer.entries()[indices[at]];
      if (!t.advantages || t.advantages->size() != n_persp) {
        throw Error("surrogates_and_grads: inconsistent advantage vectors");
      }
      std::fill(logp_grad.begin(), logp_grad.end(), 0.0);
      const double logp_new =
          policy.log_prob_accumulate(t.user, t.item, t.tokens, 1.0, logp_grad);
      for (std::size_t i = 0; i < n_persp; ++i) {
        const ClippedTerm term =
            clipped_term(logp_new, t.logp_behavior, (*t.advantages)[i], clip);
        partial_values[c][i] += term.value;
        if (term.d_dlogp_new != 0.0) {
          double* dst = partial_grads[c].data() + i * n_params;
          const double f = term.d_dlogp_new;
          for (std::size_t j = 0; j < n_params; ++j) dst[j] += f * logp_grad[j];
        }
      }
    }
  });

  std::vector<SurrogateResult> out(n_persp);
  for (std::size_t i = 0; i < n_persp; ++i) out[i].grad.assign(n_params, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t i = 0; i < n_persp; ++i) {
      out[i].value += partial_values[c][i];
      const double* src = partial_grads[c].data() + i * n_params;
      for (std::size_t j = 0; j < n_params; ++j) out[i].grad[j] += src[j];
    }
  }
  for (std::size_t i = 0; i < n_persp; ++i) {
    out[i].value *= inv_n;
    for (double& g : out[i].grad) g *= inv_n;
  }
  return out;
}

SurrogateResult surrogate_and_grad(const ReplayBuffer& buffer, const Policy& policy,
                                   std::size_t perspective, double clip) {
  std::vector<std::size_t> all(buffer.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto results = surrogates_and_grads(buffer, all, policy, clip);
  if (perspective >= results.size()) throw Error("surrogate_and_grad: bad perspective index");
  return std::move(results[perspective]);
}

namespace {

std::vector<std::string> token_words(const Vocabulary& vocab, const std::vector<int>& tokens) {
  std::vector<std::string> words;
  for (int id : tokens) {
    if (!Vocabulary::is_special(id) && id >= 0 && id < vocab.size()) {
      words.push_back(vocab.tokens[id]);
    }
  }
  return words;
}

}  // namespace

Trainer::Trainer(const Corpus& full, const Corpus& train, const Corpus& test, TrainConfig config,
                 Providers providers)
    : full_(full), train_(train), test_(test), config_(std::move(config)), providers_(providers) {
  if (!providers_.reward) throw ConfigError("trainer: a reward provider is required");
  if (!providers_.embedding) throw ConfigError("trainer: an embedding provider is required");

  const std::size_t n_persp = config_.reward_mode == RewardMode::holistic ? 1 : 2;
  constraints_ = config_.constraints.empty() ? one_hot_floors(n_persp, 0.2) : config_.constraints;

  const bool need_prompts = providers_.reward->needs_prompt_text() ||
                            providers_.fewshot_client != nullptr;
  if (need_prompts && (!providers_.prototypes || providers_.prototypes->empty())) {
    throw ConfigError("trainer: prompt prototypes are required for prompt-based providers");
  }

  // User clusters over train-history profile texts.
  std::vector<std::string> profiles(train_.users.size());
  par::for_each(train_.users.size(), [&](std::size_t u) {
    profiles[u] = user_profile_text(train_, u);
  });
  const std::size_t y = std::min(config_.clusters, profiles.size());
  const Clustering clustering =
      cluster_users(profiles, std::max<std::size_t>(1, y), stream_rng(config_.seed, 0xC1).next_u64(),
                    *providers_.embedding);
  user_cluster_ = clustering.assignment;

  // Embedding caches: one per train interaction (history text with the
  // review) and one per item (target text).
  history_vecs_.resize(train_.interactions.size());
  par::for_each(train_.interactions.size(), [&](std::size_t i) {
    const Interaction& x = train_.interactions[i];
    history_vecs_[i] = providers_.embedding->embed(format_item(train_.item_of(x), &x.explanation));
  });
  item_vecs_.resize(full_.items.size());
  par::for_each(full_.items.size(), [&](std::size_t v) {
    item_vecs_[v] = providers_.embedding->embed(format_item(full_.items[v]));
  });

  // Fixed probe pairs: the first test interactions in corpus order.
  for (const Interaction& x : test_.interactions) {
    if (probe_set_.size() >= config_.probe_pairs) break;
    probe_set_.emplace_back(static_cast<int>(full_.user_index.at(x.user_id)),
                            static_cast<int>(full_.item_index.at(x.item_id)));
  }
}

void Trainer::build_context(int user, int item, ScoringContext& ctx) const {
  ctx.target = &full_.items[static_cast<std::size_t>(item)];
  ctx.mode = config_.reward_mode;

  // Target-aware history retrieval over the cached embeddings.
  const User& u = train_.users[static_cast<std::size_t>(user)];
  std::vector<HistoryEntry> history;
  std::vector<EmbeddingVector> vecs;
  for (std::size_t inter_idx : u.history) {
    const Interaction& x = train_.interactions[inter_idx];
    history.push_back({&train_.item_of(x), x.explanation});
    vecs.push_back(history_vecs_[inter_idx]);
  }
  if (!history.empty()) {
    const auto order = rank_by_cosine(vecs, item_vecs_[static_cast<std::size_t>(item)],
                                      config_.top_k);
    ctx.history_block = build_history_block(history, order);
  }

  if (!providers_.prototypes || providers_.prototypes->empty()) return;
  const std::vector<PromptPrototype>& protos = *providers_.prototypes;
  const int cluster = user_cluster_.empty() ? 0 : user_cluster_[static_cast<std::size_t>(user)];
  const PromptPrototype& proto = protos[static_cast<std::size_t>(cluster) % protos.size()];
  ctx.examples = proto.examples;

  if (providers_.fewshot_client) {
    const std::string request = build_fewshot_context(proto, ctx.history_block, *ctx.target);
    try {
      const FewshotParse parsed = parse_fewshot_reply(providers_.fewshot_client->complete(request));
      if (!parsed.fallback) ctx.examples = parsed.examples;
    } catch (const ProviderError& e) {
      log_warn(std::string("few-shot customization unavailable, using prototype: ") + e.what());
    }
  }
}

ReplayBuffer Trainer::collect(const Policy& behavior, int iteration,
                              IterationReport& report) const {
  const Rng iter_base = stream_rng(config_.seed, 0xDA7A).child(static_cast<std::uint64_t>(iteration));

  // Observed batch: the whole training set by default, a seeded subset when
  // capped. Unobserved pairs come from the difficulty-aware sampler. The
  // final list is deduplicated, preserving first-seen order, so every pair
  // forms exactly one exploration group.
  std::vector<std::pair<int, int>> pairs;
  std::set<std::pair<int, int>> seen;
  auto push_pair = [&](int u, int v) {
    if (seen.insert({u, v}).second) pairs.emplace_back(u, v);
  };

  {
    std::vector<std::size_t> obs(train_.interactions.size());
    for (std::size_t i = 0; i < obs.size(); ++i) obs[i] = i;
    if (config_.observed_per_iteration > 0 && config_.observed_per_iteration < obs.size()) {
      Rng rng = iter_base.child(0x0B5);
      rng.shuffle(obs);
      obs.resize(config_.observed_per_iteration);
    }
    for (std::size_t i : obs) {
      const Interaction& x = train_.interactions[i];
      push_pair(static_cast<int>(train_.user_index.at(x.user_id)),
                static_cast<int>(train_.item_index.at(x.item_id)));
    }
  }
  {
    Rng rng = iter_base.child(0x7DE);
    std::size_t drawn = 0, attempts = 0;
    const std::size_t max_attempts = config_.sample_budget * 10 + 16;
    while (drawn < config_.sample_budget && attempts < max_attempts) {
      ++attempts;
      const std::size_t user = rng.uniform_int(train_.users.size());
      try {
        const auto sampled = sample_unobserved(train_, user, 1, rng);
        push_pair(static_cast<int>(user), static_cast<int>(sampled.front().second));
        ++drawn;
      } catch (const ExhaustionError&) {
        // user has seen everything; try another
      }
    }
  }

  struct Slot {
    std::vector<Trajectory> trajectories;
    std::size_t dropped = 0;
  };
  std::vector<Slot> slots(pairs.size());

  par::for_each(pairs.size(), [&](std::size_t s) {
    const auto [user, item] = pairs[s];
    ScoringContext ctx;
    build_context(user, item, ctx);
    Rng rng = iter_base.child(0x5A3).child(s);

    for (int j = 0; j < config_.explore; ++j) {
      SampledExplanation sampled =
          behavior.sample(user, item, config_.explore_temperature, rng);
      const std::vector<std::string> words = token_words(behavior.vocab(), sampled.tokens);
      RewardVector reward;
      try {
        reward = providers_.reward->score(ctx, words);
      } catch (const ProviderError&) {
        ++slots[s].dropped;
        continue;
      }
      Trajectory t;
      t.user_id = full_.users[static_cast<std::size_t>(user)].user_id;
      t.item_id = full_.items[static_cast<std::size_t>(item)].item_id;
      t.user = user;
      t.item = item;
      t.tokens = std::move(sampled.tokens);
      t.rewards = reward;
      t.logp_behavior = sampled.log_prob;
      slots[s].trajectories.push_back(std::move(t));
    }
  });

  ReplayBuffer buffer;
  std::size_t dropped = 0;
  for (Slot& slot : slots) {
    dropped += slot.dropped;
    for (Trajectory& t : slot.trajectories) buffer.append(std::move(t));
  }
  const AdvantageStats stats = group_advantages(buffer);

  report.iteration = iteration;
  report.pairs_collected = pairs.size();
  report.rewards_dropped = dropped;
  report.singleton_groups_dropped = stats.singleton_groups_dropped;
  report.buffer_size = buffer.size();
  return buffer;
}

void Trainer::update(Policy& policy, const ReplayBuffer& buffer, int iteration,
                     IterationReport& report) const {
  if (buffer.empty()) throw Error("update: empty buffer");
  const std::size_t n_params = policy.param_count();
  AdamOptimizer adam(n_params, config_.lr);
  const Rng iter_base = stream_rng(config_.seed, 0x0BDA7E).child(static_cast<std::uint64_t>(iteration));

  std::vector<std::size_t> indices(buffer.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

  std::vector<TrainExample> observed;  // for the optional auxiliary term
  if (config_.aux_rating_weight > 0.0) {
    observed = make_examples(train_, policy.vocab());
  }

  const std::size_t batch = std::max(1, config_.batch);
  std::vector<double> direction(n_params);

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    Rng shuffle_rng = iter_base.child(0x4E0).child(static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(indices);
    Rng aux_rng = iter_base.child(0xA0C).child(static_cast<std::uint64_t>(epoch));

    std::vector<double> epoch_values;
    std::size_t steps = 0;

    for (std::size_t at = 0; at < indices.size(); at += batch) {
      const std::vector<std::size_t> mini(
          indices.begin() + static_cast<std::ptrdiff_t>(at),
          indices.begin() + static_cast<std::ptrdiff_t>(std::min(indices.size(), at + batch)));
      const auto surrogates = surrogates_and_grads(buffer, mini, policy, config_.clip);

      GradientSet ascent;
      for (const auto& s : surrogates) ascent.push_back(s.grad);
      const ParetoSolution pareto = solve_weights(ascent, constraints_);
      report.omega_per_step.push_back(pareto.weights);

      if (epoch_values.empty()) epoch_values.assign(surrogates.size(), 0.0);
      for (std::size_t i = 0; i < surrogates.size(); ++i) {
        if (!std::isfinite(surrogates[i].value)) {
          throw DivergenceError("update: non-finite surrogate at iteration " +
                                std::to_string(iteration) + " epoch " + std::to_string(epoch));
        }
        epoch_values[i] += surrogates[i].value;
      }
      ++steps;

      // Descend the negative weighted surrogate (ascend the objective).
      for (std::size_t j = 0; j < n_params; ++j) direction[j] = -pareto.combined_gradient[j];
      if (config_.aux_rating_weight > 0.0 && !observed.empty()) {
        for (std::size_t b = 0; b < batch; ++b) {
          const TrainExample& ex = observed[aux_rng.uniform_int(observed.size())];
          policy.mse_accumulate(ex.user, ex.item, ex.rating,
                                config_.aux_rating_weight / static_cast<double>(batch),
                                direction);
        }
      }

      std::vector<double> theta = policy.params();
      adam.step(theta, direction);
      policy.set_params(std::move(theta));
    }

    if (steps > 0) {
      for (double& v : epoch_values) v /= static_cast<double>(steps);
    }
    report.surrogate_per_epoch.push_back(std::move(epoch_values));
  }
}

ProbeReport Trainer::evaluate_probe(const Policy& policy) const {
  ProbeReport report;
  if (probe_set_.empty()) return report;
  const std::size_t n_persp = config_.reward_mode == RewardMode::holistic ? 1 : 2;

  std::vector<std::vector<double>> scores(probe_set_.size());
  par::for_each(probe_set_.size(), [&](std::size_t i) {
    const auto [user, item] = probe_set_[i];
    ScoringContext ctx;
    build_context(user, item, ctx);
    const std::vector<int> tokens = policy.greedy_decode(user, item);
    const std::vector<std::string> words = token_words(policy.vocab(), tokens);
    try {
      scores[i] = providers_.reward->score(ctx, words).perspectives();
    } catch (const ProviderError&) {
      scores[i] = {};  // skipped below
    }
  });

  report.mean_perspectives.assign(n_persp, 0.0);
  std::size_t counted = 0;
  for (const auto& s : scores) {
    if (s.size() != n_persp) continue;
    for (std::size_t k = 0; k < n_persp; ++k) report.mean_perspectives[k] += s[k];
    ++counted;
  }
  if (counted > 0) {
    for (double& v : report.mean_perspectives) v /= static_cast<double>(counted);
  }
  for (double v : report.mean_perspectives) report.mean_combined += v;
  report.mean_combined /= static_cast<double>(n_persp);
  return report;
}

TrainOutcome Trainer::train(Policy& policy, bool pretrain_first) const {
  TrainOutcome outcome;
  if (pretrain_first) {
    PretrainConfig pc = config_.pretrain;
    if (pc.seed == 0) pc.seed = config_.seed;
    outcome.pretrain = policy.pretrain(make_examples(train_, policy.vocab()), pc);
  }
  outcome.baseline_probe = evaluate_probe(policy);

  if (!config_.out_dir.empty()) std::filesystem::create_directories(config_.out_dir);

  for (int iter = 1; iter <= config_.iterations; ++iter) {
    IterationReport report;
    const ReplayBuffer buffer = collect(policy, iter, report);

    std::unique_ptr<Policy> target = policy.clone();  // behavior stays frozen
    if (!buffer.empty()) update(*target, buffer, iter, report);
    policy.set_params(target->params());  // theta_b <- theta

    report.probe = evaluate_probe(policy);
    if (!config_.out_dir.empty()) {
      policy.save_checkpoint(config_.out_dir / ("ckpt_iter" + std::to_string(iter) + ".json"));
      std::ofstream out(config_.out_dir / ("report_iter" + std::to_string(iter) + ".json"));
      out << report_to_json(report);
    }
    outcome.iterations.push_back(std::move(report));
  }
  return outcome;
}

SweepReport sweep_beta(const Corpus& full, const Corpus& train, const Corpus& test,
                       const TrainConfig& base, const Providers& providers,
                       const Policy& pretrained, double total, double step) {
  if (base.reward_mode == RewardMode::holistic) {
    throw ConfigError("sweep-beta needs the multi-perspective reward mode");
  }
  SweepReport report;
  const int steps = static_cast<int>(std::llround(total / step));
  for (int i = 0; i <= steps; ++i) {
    const double beta_info = step * static_cast<double>(i);
    const double beta_persv = total - beta_info;

    TrainConfig config = base;
    config.out_dir.clear();
    config.constraints = {{{1.0, 0.0}, beta_info}, {{0.0, 1.0}, beta_persv}};

    Trainer trainer(full, train, test, config, providers);
    std::unique_ptr<Policy> policy = pretrained.clone();
    trainer.train(*policy, /*pretrain_first=*/false);

    SweepRow row;
    row.beta_info = beta_info;
    row.beta_persv = beta_persv;
    row.probe = trainer.evaluate_probe(*policy);
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

ordered_json probe_to_json(const ProbeReport& probe) {
  ordered_json j;
  j["mean_perspectives"] = probe.mean_perspectives;
  j["mean_combined"] = probe.mean_combined;
  return j;
}

ordered_json report_to_json_obj(const IterationReport& report) {
  ordered_json j;
  j["iteration"] = report.iteration;
  j["pairs_collected"] = report.pairs_collected;
  j["buffer_size"] = report.buffer_size;
  j["rewards_dropped"] = report.rewards_dropped;
  j["singleton_groups_dropped"] = report.singleton_groups_dropped;
  j["surrogate_per_epoch"] = report.surrogate_per_epoch;
  j["omega_per_step"] = report.omega_per_step;
  j["probe"] = probe_to_json(report.probe);
  return j;
}

}  // namespace

std::string report_to_json(const IterationReport& report) {
  return report_to_json_obj(report).dump(2);
}

std::string outcome_to_json(const TrainOutcome& outcome) {
  ordered_json j;
  j["baseline_probe"] = probe_to_json(outcome.baseline_probe);
  j["pretrain"] = {{"nll_before", outcome.pretrain.nll_before},
                   {"nll_after", outcome.pretrain.nll_after},
                   {"mse_before", outcome.pretrain.mse_before},
                   {"mse_after", outcome.pretrain.mse_after},
                   {"steps", outcome.pretrain.steps}};
  j["iterations"] = ordered_json::array();
  for (const auto& r : outcome.iterations) j["iterations"].push_back(report_to_json_obj(r));
  return j.dump(2);
}

std::string sweep_to_json(const SweepReport& report) {
  ordered_json j;
  j["rows"] = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json r;
    r["beta_info"] = row.beta_info;
    r["beta_persv"] = row.beta_persv;
    r["probe"] = probe_to_json(row.probe);
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2);
}

}  // namespace rexplain
