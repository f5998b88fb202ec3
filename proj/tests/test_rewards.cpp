#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rexplain/error.hpp"
#include "rexplain/rewards.hpp"

using namespace rexplain;

namespace {

const Item kItem{"i1", "glow serum", "hydrating serum", "skincare", {"hydration", "scent"}};
const std::vector<std::string> kLexicon{"great", "love", "amazing"};

// Scoped stub endpoint; handler decides status + body per call index.
class StubServer {
public:
  using Handler = std::function<std::pair<int, std::string>(int call_index)>;

  explicit StubServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request&, httplib::Response& res) {
      const int call = calls_++;
      auto [status, content] = handler_(call);
      res.status = status;
      if (status == 200) {
        nlohmann::json reply;
        reply["choices"] = {{{"message", {{"role", "assistant"}, {"content", content}}}}};
        res.set_content(reply.dump(), "application/json");
      } else {
        res.set_content(content, "text/plain");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  int calls() const { return calls_; }

  ChatEndpointConfig config() const {
    ChatEndpointConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_);
    c.max_retries = 2;
    c.timeout_seconds = 5;
    return c;
  }

private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> calls_{0};
};

ScoringContext context_for(const Item& item) {
  ScoringContext ctx;
  ctx.target = &item;
  ctx.examples = {{"the hydration is great", 3, 3, "names a property"}};
  return ctx;
}

}  // namespace

TEST_SUITE("rewards") {

TEST_CASE("simulated rubric counts distinct matched terms") {
  CHECK(simulated_score({"it", "works"}, kItem, kLexicon) == RewardVector::multi(1, 1));
  CHECK(simulated_score({"love", "the", "hydration", "and", "scent"}, kItem, kLexicon) ==
        RewardVector::multi(3, 2));
  // duplicates do not change the count
  CHECK(simulated_score({"scent", "scent", "scent"}, kItem, kLexicon) ==
        RewardVector::multi(2, 1));
  // caps at 3
  CHECK(simulated_score({"great", "love", "amazing"}, kItem, kLexicon).persuasiveness == 3.0);
}

TEST_CASE("adding terms never lowers the simulated scores") {
  std::vector<std::string> tokens = {"plain", "words"};
  RewardVector prev = simulated_score(tokens, kItem, kLexicon);
  for (const std::string& extra : {"hydration", "great", "scent", "love"}) {
    tokens.push_back(extra);
    const RewardVector next = simulated_score(tokens, kItem, kLexicon);
    CHECK(next.informativeness >= prev.informativeness);
    CHECK(next.persuasiveness >= prev.persuasiveness);
    prev = next;
  }
}

TEST_CASE("simulated scores stay within [1, 3] on random inputs") {
  for (int i = 0; i < 30; ++i) {
    std::vector<std::string> tokens;
    for (int t = 0; t < i % 7; ++t) tokens.push_back("w" + std::to_string((i * 3 + t) % 9));
    if (i % 2) tokens.push_back("hydration");
    if (i % 3) tokens.push_back("great");
    const RewardVector v = simulated_score(tokens, kItem, kLexicon);
    CHECK(v.informativeness >= 1.0);
    CHECK(v.informativeness <= 3.0);
    CHECK(v.persuasiveness >= 1.0);
    CHECK(v.persuasiveness <= 3.0);
  }
}

TEST_CASE("holistic mode rounds the rubric mean") {
  const RewardVector v =
      simulated_score({"love", "the", "hydration", "and", "scent"}, kItem, kLexicon,
                      RewardMode::holistic);
  CHECK(v.mode == RewardMode::holistic);
  CHECK(v.holistic == doctest::Approx(3.0));  // mean of (3,2) rounds half-up
  CHECK(v.perspectives() == std::vector<double>{3.0});
}

TEST_CASE("parse_reward_json reads plain and wrapped replies") {
  CHECK(parse_reward_json(R"({"Informativeness": 2, "Persuasiveness": 3})") ==
        RewardVector::multi(2, 3));
  CHECK(parse_reward_json(R"(Sure! {"informativeness":"1","persuasiveness":"1"})") ==
        RewardVector::multi(1, 1));
  CHECK(parse_reward_json("```json\n{\"Informativeness\": 3, \"Persuasiveness\": 2}\n```") ==
        RewardVector::multi(3, 2));
  CHECK(parse_reward_json(R"({"Quality": 2})", RewardMode::holistic) ==
        RewardVector::overall(2));
}

TEST_CASE("parse_reward_json rejects missing keys and junk") {
  CHECK_THROWS_AS(parse_reward_json(R"({"Informativeness": 2})"), ParseError);
  CHECK_THROWS_AS(parse_reward_json("no json here"), ParseError);
  CHECK_THROWS_AS(parse_reward_json(R"({"Informativeness": "high", "Persuasiveness": 2})"),
                  ParseError);
}

TEST_CASE("round trip through the reply format") {
  for (int info = 1; info <= 3; ++info) {
    for (int persv = 1; persv <= 3; ++persv) {
      const std::string reply = "{\"Informativeness\": " + std::to_string(info) +
                                ", \"Persuasiveness\": " + std::to_string(persv) + "}";
      CHECK(parse_reward_json(reply) == RewardVector::multi(info, persv));
    }
  }
}

TEST_CASE("lexicon file loads terms and the shipped asset matches the generator") {
  const auto path = std::filesystem::temp_directory_path() / "rexplain_lexicon.txt";
  std::ofstream(path) << "# comment\nGreat\n top notch \n\nlove # trailing\n";
  const auto terms = load_lexicon(path);
  CHECK(terms == std::vector<std::string>{"great", "top notch", "love"});

  const auto shipped = load_lexicon(std::filesystem::path(REXPLAIN_ASSETS_DIR) /
                                    "persuasion_lexicon.txt");
  CHECK(shipped == default_persuasion_words());
}

TEST_CASE("remote provider parses a well-formed reply") {
  StubServer server([](int) {
    return std::pair{200, std::string(R"({"Informativeness": 3, "Persuasiveness": 2})")};
  });
  RemoteProvider provider(server.config());
  CHECK(provider.score(context_for(kItem), {"the", "hydration"}) == RewardVector::multi(3, 2));
}

TEST_CASE("remote provider repairs a fenced reply wrapped in prose") {
  StubServer server([](int) {
    return std::pair{
        200, std::string("Here you go:\n```json\n{\"informativeness\": 1, \"persuasiveness\": "
                         "\"2\"}\n```\nHope that helps!")};
  });
  RemoteProvider provider(server.config());
  CHECK(provider.score(context_for(kItem), {"meh"}) == RewardVector::multi(1, 2));
}

TEST_CASE("scores outside the range are clamped") {
  StubServer server([](int) {
    return std::pair{200, std::string(R"({"Informativeness": 5, "Persuasiveness": 0})")};
  });
  RemoteProvider provider(server.config());
  CHECK(provider.score(context_for(kItem), {"x"}) == RewardVector::multi(3, 1));
}

TEST_CASE("persistent 500s exhaust the retry budget") {
  StubServer server([](int) { return std::pair{500, std::string("boom")}; });
  RemoteProvider provider(server.config());  // max_retries = 2 -> 3 attempts
  CHECK_THROWS_AS(provider.score(context_for(kItem), {"x"}), ProviderError);
  CHECK(server.calls() == 3);
}

TEST_CASE("a transient failure is retried to success") {
  StubServer server([](int call) {
    if (call == 0) return std::pair{500, std::string("warming up")};
    return std::pair{200, std::string(R"({"Informativeness": 2, "Persuasiveness": 2})")};
  });
  RemoteProvider provider(server.config());
  CHECK(provider.score(context_for(kItem), {"x"}) == RewardVector::multi(2, 2));
  CHECK(server.calls() == 2);
}

}  // TEST_SUITE
