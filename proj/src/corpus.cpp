#include "rexplain/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "rexplain/error.hpp"
#include "rexplain/jsonl.hpp"
#include "rexplain/rng.hpp"

namespace rexplain {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void Corpus::rebuild_indexes() {
  item_index.clear();
  user_index.clear();
  users.clear();
  categories.clear();
  category_index.clear();

  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!item_index.emplace(items[i].item_id, i).second) {
      throw IntegrityError("duplicate item_id \"" + items[i].item_id + "\"");
    }
    if (category_index.emplace(items[i].category, categories.size()).second) {
      categories.push_back(items[i].category);
    }
  }
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const Interaction& x = interactions[i];
    if (!item_index.contains(x.item_id)) {
      throw IntegrityError("interaction " + std::to_string(i) + " references unknown item_id \"" +
                           x.item_id + "\"");
    }
    auto [it, inserted] = user_index.emplace(x.user_id, users.size());
    if (inserted) users.push_back(User{x.user_id, {}});
    users[it->second].history.push_back(i);
  }
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> out;
  for (const std::string& tok : word_tokens(text)) out.push_back(lookup(tok));
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (is_special(id) || id < 0 || id >= size()) continue;
    if (!out.empty()) out.push_back(' ');
    out += tokens[id];
  }
  return out;
}

Vocabulary build_vocab(const Corpus& train, std::size_t min_freq) {
  std::map<std::string, std::size_t> freq;  // ordered: lexicographic tie-break for free
  for (const Interaction& x : train.interactions) {
    for (const std::string& tok : word_tokens(x.explanation)) ++freq[tok];
  }

  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  vocab.tokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (const auto& [tok, count] : entries) {
    if (count >= min_freq) vocab.tokens.push_back(tok);
  }
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
    vocab.index[vocab.tokens[i]] = static_cast<int>(i);
  }
  return vocab;
}

namespace {

std::vector<std::string> dedupe_keep_order(const std::vector<std::string>& in) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const std::string& s : in) {
    if (seen.insert(s).second) out.push_back(s);
  }
  return out;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  const auto items_path = dir / "items.jsonl";
  const auto inter_path = dir / "interactions.jsonl";

  for_each_jsonl_line(items_path, [&](const json& rec, std::size_t lineno) {
    Item item;
    item.item_id = require_field<std::string>(rec, "item_id", items_path, lineno);
    item.title = require_field<std::string>(rec, "title", items_path, lineno);
    item.description = require_field<std::string>(rec, "description", items_path, lineno);
    item.category = require_field<std::string>(rec, "category", items_path, lineno);
    item.features =
        dedupe_keep_order(require_field<std::vector<std::string>>(rec, "features", items_path, lineno));
    corpus.items.push_back(std::move(item));
  });

  for_each_jsonl_line(inter_path, [&](const json& rec, std::size_t lineno) {
    Interaction x;
    x.user_id = require_field<std::string>(rec, "user_id", inter_path, lineno);
    x.item_id = require_field<std::string>(rec, "item_id", inter_path, lineno);
    x.rating = require_field<double>(rec, "rating", inter_path, lineno);
    x.explanation = require_field<std::string>(rec, "explanation", inter_path, lineno);
    if (x.rating < 1.0 || x.rating > 5.0) {
      throw ParseError(inter_path.string(), lineno, "rating outside [1, 5]");
    }
    if (word_tokens(x.explanation).empty()) {
      throw ParseError(inter_path.string(), lineno, "explanation has no tokens");
    }
    corpus.interactions.push_back(std::move(x));
  });

  corpus.rebuild_indexes();
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  std::ofstream items_out(dir / "items.jsonl");
  for (const Item& item : corpus.items) {
    ordered_json rec;
    rec["item_id"] = item.item_id;
    rec["title"] = item.title;
    rec["description"] = item.description;
    rec["category"] = item.category;
    rec["features"] = item.features;
    items_out << rec.dump() << '\n';
  }

  std::ofstream inter_out(dir / "interactions.jsonl");
  for (const Interaction& x : corpus.interactions) {
    ordered_json rec;
    rec["user_id"] = x.user_id;
    rec["item_id"] = x.item_id;
    rec["rating"] = x.rating;
    rec["explanation"] = x.explanation;
    inter_out << rec.dump() << '\n';
  }

  // Derived view, for inspection only; load_corpus rebuilds users from
  // interactions.
  std::ofstream users_out(dir / "users.jsonl");
  for (const User& u : corpus.users) {
    ordered_json rec;
    rec["user_id"] = u.user_id;
    rec["n_interactions"] = u.history.size();
    users_out << rec.dump() << '\n';
  }
}

std::pair<Corpus, Corpus> split_leave_last(const Corpus& corpus) {
  for (const User& u : corpus.users) {
    if (u.history.size() < 2) {
      throw SplitError("user \"" + u.user_id + "\" has " + std::to_string(u.history.size()) +
                       " interaction(s); leave-last split needs at least 2");
    }
  }

  std::vector<bool> is_test(corpus.interactions.size(), false);
  for (const User& u : corpus.users) is_test[u.history.back()] = true;

  Corpus train, test;
  train.items = corpus.items;
  test.items = corpus.items;
  for (std::size_t i = 0; i < corpus.interactions.size(); ++i) {
    (is_test[i] ? test : train).interactions.push_back(corpus.interactions[i]);
  }
  train.rebuild_indexes();
  test.rebuild_indexes();

  // Keep one canonical user ordering so user indices agree across the full
  // corpus and both halves.
  auto align_users = [&corpus](Corpus& part) {
    std::vector<User> aligned;
    aligned.reserve(corpus.users.size());
    std::unordered_map<std::string, std::size_t> index;
    for (const User& u : corpus.users) {
      auto it = part.user_index.find(u.user_id);
      User copy{u.user_id, {}};
      if (it != part.user_index.end()) copy.history = part.users[it->second].history;
      index[u.user_id] = aligned.size();
      aligned.push_back(std::move(copy));
    }
    part.users = std::move(aligned);
    part.user_index = std::move(index);
  };
  align_users(train);
  align_users(test);
  return {std::move(train), std::move(test)};
}

namespace {

const std::vector<std::string> kCategoryNames = {
    "skincare", "coffee", "fitness", "games",  "books",  "audio",
    "kitchen",  "garden", "travel",  "office", "cycling", "camera"};

const std::vector<std::string> kFeaturePool = {
    "aroma",      "battery",  "blade",     "brightness", "comfort",   "crema",
    "cushion",    "display",  "durability", "fabric",     "finish",    "flavor",
    "foam",       "freshness", "grip",      "handle",     "hydration", "insulation",
    "keys",       "lather",   "lens",      "lighting",   "memory",    "motor",
    "noise",      "padding",  "pigment",   "polish",     "resolution", "scent",
    "seal",       "sharpness", "softness",  "sound",      "speed",     "stitching",
    "storage",    "strap",    "texture",   "thickness",  "traction",  "warmth",
    "weight",     "wheels",   "zoom",      "zipper",     "capacity",  "balance"};

const std::vector<std::string> kBrands = {"aster",  "borea",  "cadenza", "dorel",
                                          "elmwood", "fenna",  "gavotte", "harbor",
                                          "irides", "juno",   "kestrel", "lumen"};

const std::vector<std::string> kNeutralAdjectives = {"okay",     "fine",  "average", "decent",
                                                     "plain",    "basic", "standard", "usual",
                                                     "mild",     "simple"};

const std::vector<std::string> kPersuasionWords = {
    "great",      "amazing",   "love",       "excellent", "perfect",
    "wonderful",  "fantastic", "impressive", "recommend", "awesome",
    "delightful", "superb",    "outstanding", "brilliant", "enjoyable",
    "satisfying", "terrific",  "remarkable", "pleasant",  "worth"};

std::string pad_number(std::size_t n, int width) {
  std::string s = std::to_string(n);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

const std::vector<std::string>& default_persuasion_words() { return kPersuasionWords; }

Corpus gen_synthetic(std::size_t n_users, std::size_t n_items, std::size_t n_categories,
                     std::uint64_t seed) {
  Corpus corpus;
  Rng rng = stream_rng(seed, 0xC0DE);

  std::vector<std::string> category_names;
  for (std::size_t c = 0; c < n_categories; ++c) {
    category_names.push_back(c < kCategoryNames.size() ? kCategoryNames[c]
                                                       : "category" + pad_number(c, 2));
  }

  // Each category owns a slice of the feature pool, so items of a category
  // share vocabulary (gives retrieval and clustering something to find).
  const std::size_t slice = std::max<std::size_t>(4, kFeaturePool.size() / n_categories);

  const std::size_t latent_dim = 3;
  std::vector<std::vector<double>> item_latent(n_items);
  std::vector<double> item_bias(n_items);
  for (std::size_t v = 0; v < n_items; ++v) {
    corpus.items.push_back({});
    Item& item = corpus.items.back();
    item.item_id = "i" + pad_number(v, 4);
    const std::size_t cat = v % n_categories;
    item.category = category_names[cat];

    const std::size_t n_feat = 2 + rng.uniform_int(4);  // 2..5
    std::set<std::string> feats;
    while (feats.size() < n_feat) {
      const std::size_t base = (cat * slice) % kFeaturePool.size();
      feats.insert(kFeaturePool[(base + rng.uniform_int(slice + 2)) % kFeaturePool.size()]);
    }
    item.features.assign(feats.begin(), feats.end());

    item.title = kBrands[rng.uniform_int(kBrands.size())] + " " + item.features.front() + " " +
                 item.category + " " + pad_number(v % 97, 2);
    std::string desc = "A " + item.category + " product built around ";
    for (std::size_t f = 0; f < item.features.size(); ++f) {
      if (f > 0) desc += f + 1 == item.features.size() ? " and " : ", ";
      desc += item.features[f];
    }
    desc += ".";
    item.description = desc;

    item_latent[v].resize(latent_dim);
    for (double& x : item_latent[v]) x = rng.normal() * 0.6;
    item_bias[v] = rng.normal() * 0.8;
  }

  // Per-category item lists for preference-weighted picks.
  std::vector<std::vector<std::size_t>> by_category(n_categories);
  for (std::size_t v = 0; v < n_items; ++v) by_category[v % n_categories].push_back(v);

  for (std::size_t u = 0; u < n_users; ++u) {
    const std::string user_id = "u" + pad_number(u, 4);

    std::vector<double> user_latent(latent_dim);
    for (double& x : user_latent) x = rng.normal() * 0.6;
    const double user_bias = rng.normal() * 0.8;

    // Skewed category taste creates the imbalanced per-user category counts
    // the difficulty-aware sampler is designed around.
    std::vector<double> taste(n_categories);
    for (double& t : taste) t = 0.15 + rng.uniform();
    taste[rng.uniform_int(n_categories)] += 2.5;

    const std::size_t n_inter = 5 + rng.uniform_int(4);  // 5..8
    std::set<std::size_t> seen;
    for (std::size_t k = 0; k < n_inter && seen.size() < n_items; ++k) {
      std::size_t v = 0;
      for (int attempt = 0; attempt < 64; ++attempt) {
        const std::size_t cat = rng.weighted_index(taste);
        const auto& pool = by_category[cat];
        if (pool.empty()) continue;
        v = pool[rng.uniform_int(pool.size())];
        if (!seen.contains(v)) break;
      }
      if (seen.contains(v)) {  // fall back to any unseen item
        std::size_t probe = rng.uniform_int(n_items);
        while (seen.contains(probe)) probe = (probe + 1) % n_items;
        v = probe;
      }
      seen.insert(v);

      const Item& item = corpus.items[v];
      double affinity = 0.0;
      for (std::size_t d = 0; d < latent_dim; ++d) affinity += user_latent[d] * item_latent[v][d];
      // Bias-dominated ratings with a low-rank interaction term, the shape
      // rating predictors are built to exploit.
      double r = 3.2 + user_bias + item_bias[v] + 0.8 * affinity + 0.25 * rng.normal();
      double rating = std::clamp(std::round(r), 1.0, 5.0);

      const bool positive = rating >= 4.0;
      const bool praising = positive ? rng.uniform() < 0.85 : rng.uniform() < 0.15;
      const std::string adj = praising
                                  ? kPersuasionWords[rng.uniform_int(kPersuasionWords.size())]
                                  : kNeutralAdjectives[rng.uniform_int(kNeutralAdjectives.size())];
      const std::string& f1 = item.features[rng.uniform_int(item.features.size())];
      const std::string& f2 = item.features[rng.uniform_int(item.features.size())];

      std::string text;
      switch (rng.uniform_int(5)) {
        case 0: text = "the " + f1 + " is " + adj + " for daily use"; break;
        case 1: text = adj + " " + f1 + " and the " + f2 + " feels right"; break;
        case 2: text = "really " + adj + " " + f1 + " on this one"; break;
        case 3: text = "the " + f1 + " and " + f2 + " are " + adj; break;
        default: text = "its " + f1 + " is " + adj + " overall"; break;
      }
      corpus.interactions.push_back({user_id, item.item_id, rating, text});
    }
  }

  corpus.rebuild_indexes();
  return corpus;
}

std::vector<TrainExample> make_examples(const Corpus& corpus, const Vocabulary& vocab,
                                        int max_len) {
  std::vector<TrainExample> out;
  out.reserve(corpus.interactions.size());
  for (const Interaction& x : corpus.interactions) {
    TrainExample ex;
    ex.user = static_cast<int>(corpus.user_index.at(x.user_id));
    ex.item = static_cast<int>(corpus.item_index.at(x.item_id));
    ex.rating = x.rating;
    ex.tokens = vocab.encode(x.explanation);
    if (static_cast<int>(ex.tokens.size()) > max_len - 1) ex.tokens.resize(max_len - 1);
    ex.tokens.push_back(Vocabulary::eos_id);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace rexplain
