// Compares the chunked OpenMP kernels against the serial reference
// implementations on a synthetic workload and prints a timing table.

#include <chrono>
#include <cstdio>
#include <functional>

#include "rexplain/corpus.hpp"
#include "rexplain/parallel.hpp"
#include "rexplain/policy.hpp"
#include "rexplain/prompts.hpp"
#include "rexplain/reference.hpp"
#include "rexplain/rewards.hpp"
#include "rexplain/rng.hpp"
#include "rexplain/trainer.hpp"

using namespace rexplain;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.2f %12.2f %9.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::printf("threads: %d\n\n", par::max_threads());
  std::printf("%-28s %10s %12s %9s\n", "kernel", "serial ms", "parallel ms", "speedup");

  const Corpus corpus = gen_synthetic(400, 200, 5, 11);
  auto [train, test] = split_leave_last(corpus);
  const Vocabulary vocab = build_vocab(train);
  RecurrentPolicy policy(vocab, static_cast<int>(corpus.users.size()),
                         static_cast<int>(corpus.items.size()), 16, 11);
  const std::vector<TrainExample> examples = make_examples(train, policy.vocab());

  std::vector<TrainExample> batch(examples.begin(),
                                  examples.begin() + std::min<std::size_t>(256, examples.size()));
  row("supervised nll grad (256)",
      time_ms([&] { ref::nll_loss(policy, batch); }, 3),
      time_ms([&] { policy.nll_loss(batch); }, 3));
  row("supervised mse grad (256)",
      time_ms([&] { ref::mse_loss(policy, batch); }, 5),
      time_ms([&] { policy.mse_loss(batch); }, 5));

  // A buffer of sampled trajectories with advantages.
  ReplayBuffer buffer;
  Rng rng(99);
  const std::vector<std::string> lexicon = default_persuasion_words();
  for (int pair = 0; pair < 128; ++pair) {
    const int user = static_cast<int>(rng.uniform_int(corpus.users.size()));
    const int item = static_cast<int>(rng.uniform_int(corpus.items.size()));
    for (int j = 0; j < 5; ++j) {
      SampledExplanation s = policy.sample(user, item, 1.0, rng);
      std::vector<std::string> words;
      for (int id : s.tokens) {
        if (!Vocabulary::is_special(id)) words.push_back(vocab.tokens[id]);
      }
      Trajectory t;
      t.user_id = corpus.users[user].user_id;
      t.item_id = corpus.items[item].item_id;
      t.user = user;
      t.item = item;
      t.tokens = s.tokens;
      t.rewards = simulated_score(words, corpus.items[item], lexicon);
      t.logp_behavior = s.log_prob;
      buffer.append(std::move(t));
    }
  }
  group_advantages(buffer);

  row("clipped surrogate grad (640)",
      time_ms([&] { ref::surrogate_and_grad(buffer, policy, 0, 0.2); }, 3),
      time_ms([&] { surrogate_and_grad(buffer, policy, 0, 0.2); }, 3));

  // Feature matching over a large batch of token sequences.
  std::vector<FmrSample> samples;
  for (const TrainExample& ex : examples) {
    FmrSample s;
    s.generated = word_tokens(vocab.decode(ex.tokens));
    s.reference = s.generated;
    for (const std::string& f : corpus.items[ex.item].features) {
      s.item_features.push_back(word_tokens(f));
    }
    samples.push_back(std::move(s));
  }
  row("feature matching rate",
      time_ms([&] { ref::fmr(samples); }, 10),
      time_ms([&] { fmr(samples); }, 10));

  return 0;
}
