#include "rexplain/sampler.hpp"

#include <cmath>
#include <set>

#include "rexplain/error.hpp"

namespace rexplain {

CategoryProfile category_profile(const Corpus& corpus, std::size_t user_idx) {
  CategoryProfile profile;
  profile.counts.assign(corpus.categories.size(), 0);
  for (std::size_t inter_idx : corpus.users[user_idx].history) {
    const Interaction& x = corpus.interactions[inter_idx];
    profile.counts[corpus.category_of_item(corpus.item_index.at(x.item_id))]++;
  }
  return profile;
}

SamplingDistribution category_probs(const CategoryProfile& profile) {
  SamplingDistribution dist;
  dist.probs.resize(profile.counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < profile.counts.size(); ++i) {
    dist.probs[i] = 1.0 / std::log(static_cast<double>(profile.counts[i]) + 2.0);
    total += dist.probs[i];
  }
  for (double& p : dist.probs) p /= total;
  return dist;
}

std::vector<std::pair<std::size_t, std::size_t>> sample_unobserved(const Corpus& corpus,
                                                                   std::size_t user_idx,
                                                                   std::size_t n, Rng& rng) {
  const std::size_t n_cat = corpus.categories.size();

  std::set<std::size_t> observed;
  for (std::size_t inter_idx : corpus.users[user_idx].history) {
    observed.insert(corpus.item_index.at(corpus.interactions[inter_idx].item_id));
  }

  // Unobserved items of this user, bucketed by category.
  std::vector<std::vector<std::size_t>> unobserved(n_cat);
  for (std::size_t v = 0; v < corpus.items.size(); ++v) {
    if (!observed.contains(v)) unobserved[corpus.category_of_item(v)].push_back(v);
  }

  const SamplingDistribution dist = category_probs(category_profile(corpus, user_idx));
  std::vector<double> weights(n_cat, 0.0);
  bool any = false;
  for (std::size_t c = 0; c < n_cat; ++c) {
    if (!unobserved[c].empty()) {
      weights[c] = dist.probs[c];  // renormalized implicitly by weighted_index
      any = true;
    }
  }
  if (!any) {
    throw ExhaustionError("user \"" + corpus.users[user_idx].user_id +
                          "\" has no unobserved items to sample");
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t cat = rng.weighted_index(weights);
    const auto& pool = unobserved[cat];
    pairs.emplace_back(user_idx, pool[rng.uniform_int(pool.size())]);
  }
  return pairs;
}

}  // namespace rexplain
