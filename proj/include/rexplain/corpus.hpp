#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rexplain {

struct Item {
  std::string item_id;
  std::string title;
  std::string description;
  std::string category;
  std::vector<std::string> features;  // distinct feature terms, first-seen order

  bool operator==(const Item&) const = default;
};

struct Interaction {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;  // in [1, 5]
  std::string explanation;

  bool operator==(const Interaction&) const = default;
};

struct User {
  std::string user_id;
  std::vector<std::size_t> history;  // interaction indices, corpus order
};

// Immutable after load/generation; safe to share read-only across threads.
struct Corpus {
  std::vector<Item> items;
  std::vector<Interaction> interactions;
  std::vector<User> users;

  std::unordered_map<std::string, std::size_t> item_index;
  std::unordered_map<std::string, std::size_t> user_index;
  std::vector<std::string> categories;  // distinct, first-seen order
  std::unordered_map<std::string, std::size_t> category_index;

  const Item& item_of(const Interaction& x) const { return items[item_index.at(x.item_id)]; }
  std::size_t category_of_item(std::size_t item_idx) const {
    return category_index.at(items[item_idx].category);
  }

  // Derives users, id maps and the category list from items + interactions.
  // Throws IntegrityError on a dangling user/item reference and on duplicate
  // item ids.
  void rebuild_indexes();
};

// Lowercased, punctuation-separated word tokens. "Great cream!" -> {great, cream}.
std::vector<std::string> word_tokens(const std::string& text);

struct Vocabulary {
  // Token indices are dense; the four specials always occupy 0..3.
  static constexpr int pad_id = 0;
  static constexpr int bos_id = 1;
  static constexpr int eos_id = 2;
  static constexpr int unk_id = 3;

  std::vector<std::string> tokens;  // index -> token
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(tokens.size()); }
  int lookup(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? unk_id : it->second;
  }
  static bool is_special(int id) { return id >= 0 && id <= 3; }

  std::vector<int> encode(const std::string& text) const;
  // Joins non-special tokens with single spaces.
  std::string decode(const std::vector<int>& ids) const;
};

// Word vocabulary over the training explanations: every token with frequency
// >= min_freq, ordered by frequency descending then lexicographically, after
// the four special tokens.
Vocabulary build_vocab(const Corpus& train, std::size_t min_freq = 1);

// Reads items.jsonl + interactions.jsonl from a directory and checks
// referential integrity.
Corpus load_corpus(const std::filesystem::path& dir);

// Writes items.jsonl, interactions.jsonl and a derived users.jsonl view.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// Leave-last-interaction-out split. Both halves keep the full item table and
// the full user table (same index order as the input corpus); only the
// interactions are partitioned. Throws SplitError for users with < 2
// interactions.
std::pair<Corpus, Corpus> split_leave_last(const Corpus& corpus);

// Deterministic synthetic corpus. Ratings follow a latent user-item affinity,
// every explanation embeds at least one feature of its item, and high ratings
// carry words from the default persuasion lexicon.
Corpus gen_synthetic(std::size_t n_users, std::size_t n_items, std::size_t n_categories,
                     std::uint64_t seed);

// The persuasion word list the synthetic generator draws from. The shipped
// assets/persuasion_lexicon.txt contains exactly these words.
const std::vector<std::string>& default_persuasion_words();

// Supervised example: corpus indices plus the teacher-forcing target
// (explanation tokens truncated to max_len - 1, then the end token).
struct TrainExample {
  int user = 0;
  int item = 0;
  double rating = 0.0;
  std::vector<int> tokens;
};

std::vector<TrainExample> make_examples(const Corpus& corpus, const Vocabulary& vocab,
                                        int max_len = 15);

}  // namespace rexplain
