#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "rexplain/corpus.hpp"
#include "rexplain/reward_types.hpp"

namespace rexplain {

using EmbeddingVector = std::vector<double>;

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed(const std::string& text) const = 0;
};

// Signed token hashing into a fixed dimension, L2-normalized. Deterministic
// across platforms (FNV-1a), needs no assets; the default provider for desk
// runs and tests.
class LocalHashEmbedding final : public EmbeddingProvider {
public:
  explicit LocalHashEmbedding(std::size_t dim = 64) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  EmbeddingVector embed(const std::string& text) const override;

private:
  std::size_t dim_;
};

struct EmbeddingEndpointConfig {
  std::string base_url = "http://localhost:8080";
  std::string path = "/v1/embeddings";
  std::string model = "text-embedding-3-small";
  std::size_t dim = 1536;
  int max_retries = 2;
  int timeout_seconds = 30;
  int max_in_flight = 8;
  std::string api_key_env = "REXPLAIN_API_KEY";
};

class RemoteEmbedding final : public EmbeddingProvider {
public:
  explicit RemoteEmbedding(EmbeddingEndpointConfig config)
      : config_(std::move(config)),
        gate_(std::max(1, std::min(config_.max_in_flight, 256))) {}
  std::size_t dim() const override { return config_.dim; }
  EmbeddingVector embed(const std::string& text) const override;

private:
  EmbeddingEndpointConfig config_;
  mutable std::counting_semaphore<256> gate_;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Key-value description block for one item; history items carry the user's
// explanation as extra content.
std::string format_item(const Item& item, const std::string* explanation = nullptr);

struct HistoryEntry {
  const Item* item = nullptr;
  std::string explanation;
};

// Indices into `history` ordered by cosine(embed(entry), embed(target))
// descending; ties keep the original history order. Returns min(k, |history|)
// entries.
std::vector<std::size_t> retrieve_top_k(const std::vector<HistoryEntry>& history,
                                        const Item& target, std::size_t k,
                                        const EmbeddingProvider& provider);

// Same ranking over precomputed embeddings (callers that cache vectors).
std::vector<std::size_t> rank_by_cosine(const std::vector<EmbeddingVector>& entry_vecs,
                                        const EmbeddingVector& target_vec, std::size_t k);

// Concatenated format_item blocks in the given order.
std::string build_history_block(const std::vector<HistoryEntry>& history,
                                const std::vector<std::size_t>& order);

struct FewshotExample {
  std::string explanation;
  int informativeness = 0;
  int persuasiveness = 0;
  std::string reason;

  bool operator==(const FewshotExample&) const = default;
};

struct PromptPrototype {
  int cluster = 0;
  std::vector<FewshotExample> examples;
};

// JSONL asset: {"cluster": int, "examples": [{Explanation, Informativeness,
// Persuasiveness, Reason}]}. Validates score levels and that each cluster
// covers all three levels.
std::vector<PromptPrototype> load_prototypes(const std::filesystem::path& path);

// Serializes scoring examples the way the reward prompt presents them.
std::string serialize_examples(const std::vector<FewshotExample>& examples);

// Request asking the judge model to write customized scoring examples for
// this user/item, seeded with the cluster's prototype examples.
std::string build_fewshot_context(const PromptPrototype& prototype,
                                  const std::string& history_block, const Item& target);

struct FewshotParse {
  std::vector<FewshotExample> examples;
  bool fallback = false;  // reply unusable, caller should use the prototype
};

// Extracts every JSON object carrying the four example fields; objects with
// missing fields or out-of-range scores are skipped. Zero usable examples
// flags the prototype fallback.
FewshotParse parse_fewshot_reply(const std::string& text);

// The scoring request sent per candidate explanation. Holistic mode swaps the
// two-perspective rubric for a single overall-quality rubric.
std::string build_reward_prompt(const std::string& history_block, const Item& target,
                                const std::vector<FewshotExample>& examples,
                                const std::string& candidate,
                                RewardMode mode = RewardMode::multi_perspective);

// Profile text for clustering: blocks of the user's most recent `recent`
// history items.
std::string user_profile_text(const Corpus& corpus, std::size_t user_idx, std::size_t recent = 5);

struct Clustering {
  std::vector<int> assignment;                 // per input point
  std::vector<std::vector<double>> centroids;  // y rows
  std::vector<double> objective_history;       // within-cluster sum of squares per round
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding; runs to an assignment fixpoint or
// 100 rounds. Deterministic per seed.
Clustering kmeans(const std::vector<EmbeddingVector>& points, std::size_t y, std::uint64_t seed);

Clustering cluster_users(const std::vector<std::string>& profile_texts, std::size_t y,
                         std::uint64_t seed, const EmbeddingProvider& provider);

}  // namespace rexplain
