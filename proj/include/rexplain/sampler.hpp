#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rexplain/corpus.hpp"
#include "rexplain/rng.hpp"

namespace rexplain {

// Per-user interaction counts over the corpus categories.
struct CategoryProfile {
  std::vector<std::size_t> counts;  // one entry per category
  std::size_t category_count() const { return counts.size(); }
};

struct SamplingDistribution {
  std::vector<double> probs;  // non-negative, sums to 1
};

CategoryProfile category_profile(const Corpus& corpus, std::size_t user_idx);

// p_i proportional to 1 / ln(N_i + 2); under-represented categories get the
// larger share. The log base cancels in the ratio, natural log is used.
SamplingDistribution category_probs(const CategoryProfile& profile);

// n (user, item) index pairs the user has not interacted with, drawn with
// replacement: category first (per category_probs, renormalized over
// categories that still have unobserved items for this user), then an item
// uniformly within the category. Throws ExhaustionError when the user has
// interacted with every item.
std::vector<std::pair<std::size_t, std::size_t>> sample_unobserved(const Corpus& corpus,
                                                                   std::size_t user_idx,
                                                                   std::size_t n, Rng& rng);

}  // namespace rexplain
