#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rexplain/corpus.hpp"
#include "rexplain/error.hpp"

using namespace rexplain;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rexplain_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("load preserves counts and checks references") {
  const fs::path dir = temp_dir("load");
  write_file(dir / "items.jsonl",
             R"({"item_id":"i1","title":"t1","description":"d1","category":"c1","features":["scent"]})"
             "\n"
             R"({"item_id":"i2","title":"t2","description":"d2","category":"c2","features":["grip"]})"
             "\n");
  write_file(dir / "interactions.jsonl",
             R"({"user_id":"u1","item_id":"i1","rating":4.0,"explanation":"nice scent"})"
             "\n"
             R"({"user_id":"u1","item_id":"i2","rating":2.0,"explanation":"weak grip"})"
             "\n"
             R"({"user_id":"u2","item_id":"i1","rating":5.0,"explanation":"great scent here"})"
             "\n");
  const Corpus corpus = load_corpus(dir);
  CHECK(corpus.users.size() == 2);
  CHECK(corpus.items.size() == 2);
  CHECK(corpus.interactions.size() == 3);
  CHECK(corpus.users[0].history == std::vector<std::size_t>{0, 1});
}

TEST_CASE("dangling item reference is an integrity error") {
  const fs::path dir = temp_dir("dangling");
  write_file(dir / "items.jsonl",
             R"({"item_id":"i1","title":"t","description":"d","category":"c","features":["x"]})"
             "\n");
  write_file(dir / "interactions.jsonl",
             R"({"user_id":"u1","item_id":"nope","rating":3.0,"explanation":"ok thing"})"
             "\n");
  CHECK_THROWS_AS(load_corpus(dir), IntegrityError);
}

TEST_CASE("malformed line reports its line number") {
  const fs::path dir = temp_dir("badline");
  write_file(dir / "items.jsonl",
             R"({"item_id":"i1","title":"t","description":"d","category":"c","features":["x"]})"
             "\n"
             "{oops\n");
  write_file(dir / "interactions.jsonl", "");
  try {
    load_corpus(dir);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("synthetic corpus round-trips through save and load") {
  const Corpus corpus = gen_synthetic(12, 8, 3, 5);
  const fs::path dir_a = temp_dir("rt_a");
  const fs::path dir_b = temp_dir("rt_b");
  save_corpus(corpus, dir_a);
  const Corpus reloaded = load_corpus(dir_a);
  save_corpus(reloaded, dir_b);

  CHECK(reloaded.items == corpus.items);
  CHECK(reloaded.interactions == corpus.interactions);
  CHECK(slurp(dir_a / "items.jsonl") == slurp(dir_b / "items.jsonl"));
  CHECK(slurp(dir_a / "interactions.jsonl") == slurp(dir_b / "interactions.jsonl"));
}

TEST_CASE("split keeps the last interaction per user as test") {
  const fs::path dir = temp_dir("split");
  write_file(dir / "items.jsonl",
             R"({"item_id":"a","title":"t","description":"d","category":"c","features":["x"]})"
             "\n"
             R"({"item_id":"b","title":"t","description":"d","category":"c","features":["x"]})"
             "\n"
             R"({"item_id":"c","title":"t","description":"d","category":"c","features":["x"]})"
             "\n");
  write_file(dir / "interactions.jsonl",
             R"({"user_id":"u","item_id":"a","rating":3.0,"explanation":"first x"})"
             "\n"
             R"({"user_id":"u","item_id":"b","rating":3.0,"explanation":"second x"})"
             "\n"
             R"({"user_id":"u","item_id":"c","rating":3.0,"explanation":"third x"})"
             "\n");
  const Corpus corpus = load_corpus(dir);
  const auto [train, test] = split_leave_last(corpus);
  CHECK(train.interactions.size() == 2);
  CHECK(test.interactions.size() == 1);
  CHECK(test.interactions[0].item_id == "c");
  CHECK(train.interactions[0].item_id == "a");
  CHECK(train.interactions[1].item_id == "b");
}

TEST_CASE("split emits one test interaction per user and partitions the corpus") {
  const Corpus corpus = gen_synthetic(100, 40, 4, 3);
  const auto [train, test] = split_leave_last(corpus);
  CHECK(test.interactions.size() == corpus.users.size());
  CHECK(train.interactions.size() + test.interactions.size() == corpus.interactions.size());
  for (std::size_t u = 0; u < corpus.users.size(); ++u) {
    CHECK(train.users[u].user_id == corpus.users[u].user_id);
    CHECK(test.users[u].user_id == corpus.users[u].user_id);
    CHECK(test.users[u].history.size() == 1);
  }
}

TEST_CASE("split rejects a single-interaction user by name") {
  Corpus corpus;
  corpus.items.push_back({"i1", "t", "d", "c", {"x"}});
  corpus.interactions.push_back({"lonely", "i1", 3.0, "some x"});
  corpus.rebuild_indexes();
  CHECK_THROWS_WITH_AS(split_leave_last(corpus), doctest::Contains("lonely"), SplitError);
}

TEST_CASE("vocab respects min_freq and is deterministic") {
  Corpus corpus;
  corpus.items.push_back({"i1", "t", "d", "c", {"x"}});
  corpus.interactions.push_back({"u1", "i1", 3.0, "a b"});
  corpus.interactions.push_back({"u2", "i1", 3.0, "a c"});
  corpus.rebuild_indexes();

  const Vocabulary v2 = build_vocab(corpus, 2);
  CHECK(v2.size() == 5);  // 4 specials + "a"
  CHECK(v2.lookup("a") == 4);
  CHECK(v2.lookup("b") == Vocabulary::unk_id);

  const Vocabulary v1 = build_vocab(corpus, 1);
  CHECK(v1.size() == 7);
  CHECK(v1.lookup("a") == 4);  // most frequent first, then lexicographic
  CHECK(v1.lookup("b") == 5);
  CHECK(v1.lookup("c") == 6);

  const Vocabulary again = build_vocab(corpus, 1);
  CHECK(again.tokens == v1.tokens);
}

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(word_tokens("Great cream!") == std::vector<std::string>{"great", "cream"});
  CHECK(word_tokens("...").empty());

  Corpus corpus;
  corpus.items.push_back({"i1", "t", "d", "c", {"x"}});
  corpus.interactions.push_back({"u1", "i1", 3.0, "great cream"});
  corpus.rebuild_indexes();
  const Vocabulary vocab = build_vocab(corpus, 1);

  CHECK(vocab.encode("Great cream!") ==
        std::vector<int>{vocab.lookup("great"), vocab.lookup("cream")});
  CHECK(vocab.encode("zzzz") == std::vector<int>{Vocabulary::unk_id});
  CHECK(vocab.decode(vocab.encode("great cream")) == "great cream");
}

TEST_CASE("synthetic generation is deterministic and shaped as asked") {
  const Corpus a = gen_synthetic(200, 100, 5, 7);
  const Corpus b = gen_synthetic(200, 100, 5, 7);
  CHECK(a.items == b.items);
  CHECK(a.interactions == b.interactions);
  CHECK(a.users.size() == 200);
  CHECK(a.items.size() == 100);
  CHECK(a.categories.size() == 5);

  const Corpus c = gen_synthetic(200, 100, 5, 8);
  CHECK(a.interactions != c.interactions);
}

TEST_CASE("every synthetic explanation embeds a feature of its item") {
  const Corpus corpus = gen_synthetic(60, 30, 4, 2);
  for (const Interaction& x : corpus.interactions) {
    CHECK(x.rating >= 1.0);
    CHECK(x.rating <= 5.0);
    const Item& item = corpus.item_of(x);
    const auto tokens = word_tokens(x.explanation);
    CHECK(!tokens.empty());
    bool found = false;
    for (const std::string& f : item.features) {
      for (const std::string& tok : tokens) {
        if (tok == f) found = true;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("items get one category and 2-5 features") {
  const Corpus corpus = gen_synthetic(5, 50, 6, 9);
  for (const Item& item : corpus.items) {
    CHECK(item.features.size() >= 2);
    CHECK(item.features.size() <= 5);
    CHECK(corpus.category_index.contains(item.category));
  }
}

TEST_CASE("make_examples truncates to max_len with a terminator") {
  Corpus corpus;
  corpus.items.push_back({"i1", "t", "d", "c", {"x"}});
  std::string long_text;
  for (int i = 0; i < 30; ++i) long_text += "w" + std::to_string(i) + " ";
  corpus.interactions.push_back({"u1", "i1", 3.0, long_text});
  corpus.interactions.push_back({"u1", "i1", 3.0, "short x"});
  corpus.rebuild_indexes();
  const Vocabulary vocab = build_vocab(corpus, 1);

  const auto examples = make_examples(corpus, vocab, 15);
  CHECK(examples[0].tokens.size() == 15);
  CHECK(examples[0].tokens.back() == Vocabulary::eos_id);
  CHECK(examples[1].tokens.size() == 3);
  CHECK(examples[1].tokens.back() == Vocabulary::eos_id);
}

}  // TEST_SUITE
