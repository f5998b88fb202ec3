#include "rexplain/prompts.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "json_scan.hpp"
#include "rexplain/error.hpp"
#include "rexplain/jsonl.hpp"
#include "rexplain/log.hpp"
#include "rexplain/parallel.hpp"
#include "rexplain/rng.hpp"

namespace rexplain {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void replace_all(std::string& text, const std::string& marker, const std::string& value) {
  std::size_t at = 0;
  while ((at = text.find(marker, at)) != std::string::npos) {
    text.replace(at, marker.size(), value);
    at += value.size();
  }
}

}  // namespace

EmbeddingVector LocalHashEmbedding::embed(const std::string& text) const {
  EmbeddingVector v(dim_, 0.0);
  for (const std::string& tok : word_tokens(text)) {
    const std::uint64_t h = fnv1a(tok);
    const std::size_t idx = static_cast<std::size_t>(h % dim_);
    v[idx] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

EmbeddingVector RemoteEmbedding::embed(const std::string& text) const {
  gate_.acquire();
  struct Release {
    std::counting_semaphore<256>& g;
    ~Release() { g.release(); }
  } release{gate_};

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  json body;
  body["model"] = config_.model;
  body["input"] = std::vector<std::string>{text};

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
    }
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport failure";
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("data") || reply["data"].empty() ||
        !reply["data"][0].contains("embedding")) {
      last_error = "malformed embeddings reply";
      continue;
    }
    return reply["data"][0]["embedding"].get<EmbeddingVector>();
  }
  throw ProviderError("embedding unavailable after " + std::to_string(config_.max_retries + 1) +
                      " attempt(s): " + last_error);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) throw Error("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string format_item(const Item& item, const std::string* explanation) {
  ordered_json block;
  block["Item Title"] = item.title;
  block["Item Description"] = item.description;
  block["Item Category"] = item.category;
  if (explanation) block["Recommendation Explanation"] = *explanation;
  return block.dump(2);
}

std::vector<std::size_t> rank_by_cosine(const std::vector<EmbeddingVector>& entry_vecs,
                                        const EmbeddingVector& target_vec, std::size_t k) {
  std::vector<double> sims(entry_vecs.size(), 0.0);
  for (std::size_t i = 0; i < entry_vecs.size(); ++i) {
    sims[i] = cosine(entry_vecs[i], target_vec);
  }
  std::vector<std::size_t> order(entry_vecs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

std::vector<std::size_t> retrieve_top_k(const std::vector<HistoryEntry>& history,
                                        const Item& target, std::size_t k,
                                        const EmbeddingProvider& provider) {
  if (history.empty()) throw Error("retrieve_top_k: empty history");
  const EmbeddingVector target_vec = provider.embed(format_item(target));

  std::vector<EmbeddingVector> vecs(history.size());
  par::for_each(history.size(), [&](std::size_t i) {
    const HistoryEntry& e = history[i];
    vecs[i] = provider.embed(format_item(*e.item, &e.explanation));
  });
  return rank_by_cosine(vecs, target_vec, k);
}

std::string build_history_block(const std::vector<HistoryEntry>& history,
                                const std::vector<std::size_t>& order) {
  std::string out;
  for (std::size_t idx : order) {
    if (!out.empty()) out += "\n";
    out += format_item(*history[idx].item, &history[idx].explanation);
    out += "\n";
  }
  return out;
}

std::vector<PromptPrototype> load_prototypes(const std::filesystem::path& path) {
  std::vector<PromptPrototype> out;
  for_each_jsonl_line(path, [&](const json& rec, std::size_t lineno) {
    PromptPrototype proto;
    proto.cluster = require_field<int>(rec, "cluster", path, lineno);
    const json examples = require_field<json>(rec, "examples", path, lineno);
    if (!examples.is_array() || examples.empty()) {
      throw ParseError(path.string(), lineno, "\"examples\" must be a non-empty array");
    }
    std::set<int> levels;
    for (const json& e : examples) {
      FewshotExample ex;
      ex.explanation = require_field<std::string>(e, "Explanation", path, lineno);
      ex.informativeness = require_field<int>(e, "Informativeness", path, lineno);
      ex.persuasiveness = require_field<int>(e, "Persuasiveness", path, lineno);
      ex.reason = require_field<std::string>(e, "Reason", path, lineno);
      if (ex.informativeness < 1 || ex.informativeness > 3 || ex.persuasiveness < 1 ||
          ex.persuasiveness > 3) {
        throw ParseError(path.string(), lineno, "example scores must be in {1,2,3}");
      }
      levels.insert(ex.informativeness);
      levels.insert(ex.persuasiveness);
      proto.examples.push_back(std::move(ex));
    }
    if (levels != std::set<int>{1, 2, 3}) {
      throw ParseError(path.string(), lineno,
                       "prototype examples must cover all score levels 1, 2 and 3");
    }
    out.push_back(std::move(proto));
  });
  if (out.empty()) throw ParseError(path.string(), 0, "no prototypes found");
  return out;
}

std::string serialize_examples(const std::vector<FewshotExample>& examples) {
  ordered_json arr = ordered_json::array();
  for (const FewshotExample& e : examples) {
    ordered_json obj;
    obj["Explanation"] = e.explanation;
    obj["Informativeness"] = e.informativeness;
    obj["Persuasiveness"] = e.persuasiveness;
    obj["Reason"] = e.reason;
    arr.push_back(std::move(obj));
  }
  return arr.dump(2);
}

namespace {

const char* kFewshotTemplate =
    "Given the following scored examples of recommendation explanations, with two scores (1-3) "
    "based on\n"
    "\n"
    "a. Informativeness: Help user learn more about the recommended item;\n"
    "\n"
    "b. Persuasiveness: Help user want to buy the item.\n"
    "\n"
    "<<examples>>\n"
    "\n"
    "A user has interacted with the following items:\n"
    "\n"
    "<<history>>\n"
    "And we have information about the target item:\n"
    "\n"
    "<<target>>\n"
    "\n"
    "Based on the above examples, generate three explanation examples and corresponding reasons "
    "for this user about the target item.\n"
    "\n"
    "**IMPORTANT NOTE**\n"
    "\n"
    "1. Ensure output MUST adhere to the following format:\n"
    "{\n"
    "  \"Explanation\": # less than 15 words,\n"
    "  \"Informativeness\": # [1-3],\n"
    "  \"Persuasiveness\": # [1-3],\n"
    "  \"Reason\": # less than 100 words\n"
    "}.\n"
    "\n"
    "2. The generated examples must cover all score levels, that is, 1, 2, and 3.\n"
    "\n"
    "3. Please generate results directly, without any additional thinking process.\n";

const char* kRewardTemplateMulti =
    "You need to act as an explainable recommender system, providing explanations used to help "
    "the user understand why an item was recommended.\n"
    "\n"
    "A user has interacted with the following items:\n"
    "\n"
    "<<history>>\n"
    "And we have information about the target item:\n"
    "\n"
    "<<target>>\n"
    "\n"
    "Here are some explanations about recommending the target item to this user, and scores "
    "(from range [1-3]) are given from the perspectives of\n"
    "\n"
    "a. Informativeness: Help user learn more about the recommended item;\n"
    "\n"
    "b. Persuasiveness: Help user want to buy the item.\n"
    "\n"
    "### Example BEGIN ###\n"
    "<<examples>>\n"
    "### Example END ###\n"
    "\n"
    "A new recommendation explanation is provided as follows:\n"
    "\n"
    "<<candidate>>\n"
    "\n"
    "Learn from the above examples to evaluate new explanation.\n"
    "\n"
    "**IMPORTANT NOTES**\n"
    "\n"
    "1. The output format MUST be:\n"
    "{\n"
    "  \"Informativeness\": # [1-3],\n"
    "  \"Persuasiveness\": # [1-3]\n"
    "}.\n"
    "\n"
    "2. Please ensure that the scoring for the two perspectives of explanation quality is done "
    "independently, without influencing each other.\n";

const char* kRewardTemplateHolistic =
    "You need to act as an explainable recommender system, providing explanations used to help "
    "the user understand why an item was recommended.\n"
    "\n"
    "A user has interacted with the following items:\n"
    "\n"
    "<<history>>\n"
    "And we have information about the target item:\n"
    "\n"
    "<<target>>\n"
    "\n"
    "Here are some explanations about recommending the target item to this user, and scores "
    "(from range [1-3]) are given from the perspective of\n"
    "\n"
    "a. Quality: Overall quality of the explanation for helping the user understand and act on "
    "the recommendation.\n"
    "\n"
    "### Example BEGIN ###\n"
    "<<examples>>\n"
    "### Example END ###\n"
    "\n"
    "A new recommendation explanation is provided as follows:\n"
    "\n"
    "<<candidate>>\n"
    "\n"
    "Learn from the above examples to evaluate new explanation.\n"
    "\n"
    "**IMPORTANT NOTES**\n"
    "\n"
    "1. The output format MUST be:\n"
    "{\n"
    "  \"Quality\": # [1-3]\n"
    "}.\n";

int holistic_level(const FewshotExample& e) {
  const double mean = 0.5 * (e.informativeness + e.persuasiveness);
  return static_cast<int>(std::floor(mean + 0.5));
}

std::string serialize_examples_holistic(const std::vector<FewshotExample>& examples) {
  ordered_json arr = ordered_json::array();
  for (const FewshotExample& e : examples) {
    ordered_json obj;
    obj["Explanation"] = e.explanation;
    obj["Quality"] = holistic_level(e);
    obj["Reason"] = e.reason;
    arr.push_back(std::move(obj));
  }
  return arr.dump(2);
}

}  // namespace

std::string build_fewshot_context(const PromptPrototype& prototype,
                                  const std::string& history_block, const Item& target) {
  std::string out = kFewshotTemplate;
  replace_all(out, "<<examples>>", serialize_examples(prototype.examples));
  replace_all(out, "<<history>>", history_block);
  replace_all(out, "<<target>>", format_item(target));
  return out;
}

FewshotParse parse_fewshot_reply(const std::string& text) {
  FewshotParse result;
  for (const json& obj : detail::scan_json_objects(text)) {
    const json* expl = detail::find_key_ci(obj, "Explanation");
    const json* info = detail::find_key_ci(obj, "Informativeness");
    const json* persv = detail::find_key_ci(obj, "Persuasiveness");
    const json* reason = detail::find_key_ci(obj, "Reason");
    if (!expl || !info || !persv || !reason) continue;
    if (!expl->is_string() || !reason->is_string()) continue;
    const auto info_v = detail::as_number(*info);
    const auto persv_v = detail::as_number(*persv);
    if (!info_v || !persv_v) continue;
    const int i = static_cast<int>(std::llround(*info_v));
    const int p = static_cast<int>(std::llround(*persv_v));
    if (i < 1 || i > 3 || p < 1 || p > 3) continue;
    result.examples.push_back(
        {expl->get<std::string>(), i, p, reason->get<std::string>()});
  }
  if (result.examples.empty()) {
    result.fallback = true;
    log_warn("few-shot reply contained no usable examples; falling back to the prototype");
  }
  return result;
}

std::string build_reward_prompt(const std::string& history_block, const Item& target,
                                const std::vector<FewshotExample>& examples,
                                const std::string& candidate, RewardMode mode) {
  std::string out =
      mode == RewardMode::holistic ? kRewardTemplateHolistic : kRewardTemplateMulti;
  replace_all(out, "<<examples>>", mode == RewardMode::holistic
                                       ? serialize_examples_holistic(examples)
                                       : serialize_examples(examples));
  replace_all(out, "<<history>>", history_block);
  replace_all(out, "<<target>>", format_item(target));
  replace_all(out, "<<candidate>>", candidate);
  return out;
}

std::string user_profile_text(const Corpus& corpus, std::size_t user_idx, std::size_t recent) {
  const User& user = corpus.users[user_idx];
  const std::size_t n = user.history.size();
  const std::size_t start = n > recent ? n - recent : 0;
  std::string out;
  for (std::size_t i = start; i < n; ++i) {
    const Interaction& x = corpus.interactions[user.history[i]];
    out += format_item(corpus.item_of(x), &x.explanation);
    out += "\n";
  }
  return out;
}

namespace {

double sq_dist(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

Clustering kmeans(const std::vector<EmbeddingVector>& points, std::size_t y, std::uint64_t seed) {
  if (points.size() < y || y == 0) throw Error("kmeans: need at least y points");
  const std::size_t n = points.size();
  const std::size_t dim = points[0].size();
  Rng rng = stream_rng(seed, 0x4B4D);

  // k-means++ seeding
  Clustering result;
  result.centroids.push_back(points[rng.uniform_int(n)]);
  std::vector<double> d2(n);
  while (result.centroids.size() < y) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (const auto& c : result.centroids) best = std::min(best, sq_dist(points[i], c));
      d2[i] = best;
    }
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick;
    if (total <= 0.0) {
      pick = rng.uniform_int(n);  // all points coincide with centroids
    } else {
      pick = rng.weighted_index(d2);
    }
    result.centroids.push_back(points[pick]);
  }

  result.assignment.assign(n, -1);
  std::vector<int> next(n, -1);
  for (int round = 0; round < 100; ++round) {
    // Assignment (ties go to the lowest cluster index).
    std::vector<double> costs(n, 0.0);
    par::for_each(n, [&](std::size_t i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (std::size_t c = 0; c < result.centroids.size(); ++c) {
        const double d = sq_dist(points[i], result.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      next[i] = best;
      costs[i] = best_d;
    });
    double objective = 0.0;
    for (double c : costs) objective += c;
    result.objective_history.push_back(objective);
    result.iterations = round + 1;

    const bool converged = next == result.assignment;
    result.assignment = next;
    if (converged) break;

    // Update step; empty clusters get reseeded to the farthest point.
    std::vector<std::size_t> counts(y, 0);
    for (auto& c : result.centroids) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = result.assignment[i];
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) result.centroids[c][j] += points[i][j];
    }
    for (std::size_t c = 0; c < y; ++c) {
      if (counts[c] == 0) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (costs[i] > far_d) {
            far_d = costs[i];
            far = i;
          }
        }
        result.centroids[c] = points[far];
      } else {
        for (std::size_t j = 0; j < dim; ++j) {
          result.centroids[c][j] /= static_cast<double>(counts[c]);
        }
      }
    }
  }
  return result;
}

Clustering cluster_users(const std::vector<std::string>& profile_texts, std::size_t y,
                         std::uint64_t seed, const EmbeddingProvider& provider) {
  std::vector<EmbeddingVector> points(profile_texts.size());
  par::for_each(profile_texts.size(), [&](std::size_t i) {
    points[i] = provider.embed(profile_texts[i]);
  });
  return kmeans(points, y, seed);
}

}  // namespace rexplain
