#include <doctest.h>

#include "rexplain/corpus.hpp"
#include "rexplain/parallel.hpp"
#include "rexplain/policy.hpp"
#include "rexplain/reference.hpp"
#include "rexplain/rng.hpp"
#include "test_util.hpp"

using namespace rexplain;
using testutil::max_rel_error;

namespace {

struct KernelFixture {
  Corpus corpus = gen_synthetic(40, 20, 4, 13);
  Vocabulary vocab;
  std::unique_ptr<RecurrentPolicy> policy;
  std::vector<TrainExample> batch;

  KernelFixture() {
    auto [train, test] = split_leave_last(corpus);
    vocab = build_vocab(train);
    policy = std::make_unique<RecurrentPolicy>(vocab, 40, 20, 8, 13);
    batch = make_examples(train, vocab);
    batch.resize(50);
  }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("chunked nll kernel matches the serial reference") {
  KernelFixture f;
  const LossGrad fast = f.policy->nll_loss(f.batch);
  const LossGrad slow = ref::nll_loss(*f.policy, f.batch);
  CHECK(fast.loss == doctest::Approx(slow.loss).epsilon(1e-12));
  CHECK(max_rel_error(fast.grad, slow.grad) <= 1e-10);
}

TEST_CASE("chunked mse kernel matches the serial reference") {
  KernelFixture f;
  const LossGrad fast = f.policy->mse_loss(f.batch);
  const LossGrad slow = ref::mse_loss(*f.policy, f.batch);
  CHECK(fast.loss == doctest::Approx(slow.loss).epsilon(1e-12));
  CHECK(max_rel_error(fast.grad, slow.grad) <= 1e-10);
}

TEST_CASE("parallel kernels are bitwise reproducible") {
  KernelFixture f;
  const LossGrad a = f.policy->nll_loss(f.batch);
  const LossGrad b = f.policy->nll_loss(f.batch);
  CHECK(a.loss == b.loss);
  CHECK(a.grad == b.grad);  // exact equality: chunk order is fixed

  const LossGrad c = f.policy->mse_loss(f.batch);
  const LossGrad d = f.policy->mse_loss(f.batch);
  CHECK(c.grad == d.grad);
}

TEST_CASE("fmr kernel matches the serial reference") {
  KernelFixture f;
  std::vector<FmrSample> samples;
  Rng rng(14);
  for (const TrainExample& ex : f.batch) {
    FmrSample s;
    s.generated = word_tokens(f.vocab.decode(ex.tokens));
    s.reference = s.generated;
    if (rng.uniform() < 0.5) s.reference.push_back("different");
    for (const std::string& feat : f.corpus.items[ex.item].features) {
      s.item_features.push_back(word_tokens(feat));
    }
    samples.push_back(std::move(s));
  }
  CHECK(fmr(samples) == ref::fmr(samples));
}

TEST_CASE("chunks partition the index space exactly once") {
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 100u}) {
    std::vector<int> hits(n, 0);
    par::chunked(n, 8, [&](std::size_t begin, std::size_t end, std::size_t) {
      for (std::size_t i = begin; i < end; ++i) hits[i]++;
    });
    for (int h : hits) CHECK(h == 1);
  }
}

}  // TEST_SUITE
