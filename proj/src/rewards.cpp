#include "rexplain/rewards.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "json_scan.hpp"
#include "rexplain/error.hpp"
#include "rexplain/log.hpp"
#include "rexplain/prompts.hpp"

namespace rexplain {

using nlohmann::json;

std::vector<std::string> load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open lexicon file");
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string term;
    for (const std::string& tok : word_tokens(line)) {
      if (!term.empty()) term.push_back(' ');
      term += tok;
    }
    if (!term.empty()) terms.push_back(std::move(term));
  }
  if (terms.empty()) throw ParseError(path.string(), 0, "lexicon file has no terms");
  return terms;
}

namespace {

bool contains_term(const std::vector<std::string>& tokens, const std::vector<std::string>& term) {
  if (term.empty() || term.size() > tokens.size()) return false;
  for (std::size_t i = 0; i + term.size() <= tokens.size(); ++i) {
    if (std::equal(term.begin(), term.end(), tokens.begin() + i)) return true;
  }
  return false;
}

std::size_t distinct_matches(const std::vector<std::string>& tokens,
                             const std::vector<std::string>& terms) {
  std::size_t count = 0;
  std::vector<std::string> seen;
  for (const std::string& term : terms) {
    if (std::find(seen.begin(), seen.end(), term) != seen.end()) continue;
    seen.push_back(term);
    if (contains_term(tokens, word_tokens(term))) ++count;
  }
  return count;
}

}  // namespace

RewardVector simulated_score(const std::vector<std::string>& explanation_tokens,
                             const Item& target, const std::vector<std::string>& lexicon,
                             RewardMode mode) {
  if (lexicon.empty()) throw Error("simulated_score: empty lexicon");
  const double info =
      1.0 + static_cast<double>(std::min<std::size_t>(2, distinct_matches(explanation_tokens,
                                                                          target.features)));
  const double persv = 1.0 + static_cast<double>(
                                 std::min<std::size_t>(2, distinct_matches(explanation_tokens,
                                                                           lexicon)));
  if (mode == RewardMode::holistic) {
    // Half-up rounded mean of the two rubric scores.
    return RewardVector::overall(std::floor(0.5 * (info + persv) + 0.5));
  }
  return RewardVector::multi(info, persv);
}

RewardVector parse_reward_json(const std::string& text, RewardMode mode) {
  const auto obj = detail::first_json_object(text);
  if (!obj) throw ParseError("reward reply contains no JSON object");

  auto read_score = [&](const char* key) {
    const json* v = detail::find_key_ci(*obj, key);
    if (!v) throw ParseError(std::string("reward reply is missing \"") + key + "\"");
    const auto num = detail::as_number(*v);
    if (!num) throw ParseError(std::string("reward reply field \"") + key + "\" is not numeric");
    return *num;
  };

  if (mode == RewardMode::holistic) return RewardVector::overall(read_score("Quality"));
  return RewardVector::multi(read_score("Informativeness"), read_score("Persuasiveness"));
}

std::string ChatClient::complete(const std::string& prompt) const {
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
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config_.temperature;
  const std::string payload = body.dump();

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
    }
    auto res = client.Post(config_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport failure";
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) {
      last_error = "reply is not JSON";
      continue;
    }
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      last_error = "reply missing choices[0].message.content";
      continue;
    }
  }
  throw ProviderError("chat endpoint unavailable after " +
                      std::to_string(config_.max_retries + 1) + " attempt(s): " + last_error);
}

namespace {

double clamp_score(double v, const char* key) {
  if (v < 1.0 || v > 3.0) {
    log_warn(std::string(key) + " score " + std::to_string(v) + " outside [1,3], clamped");
    return std::clamp(v, 1.0, 3.0);
  }
  return v;
}

}  // namespace

RewardVector RemoteProvider::score(const ScoringContext& ctx,
                                   const std::vector<std::string>& explanation_tokens) const {
  std::string candidate;
  for (const std::string& tok : explanation_tokens) {
    if (!candidate.empty()) candidate.push_back(' ');
    candidate += tok;
  }
  const std::string prompt =
      build_reward_prompt(ctx.history_block, *ctx.target, ctx.examples, candidate, mode_);

  // Unparseable replies are retried like transport failures; the budget here
  // is on top of the client's own HTTP retries.
  std::string last_error;
  for (int attempt = 0; attempt <= client_.config().max_retries; ++attempt) {
    std::string reply;
    try {
      reply = client_.complete(prompt);
    } catch (const ProviderError& e) {
      throw ProviderError(std::string("reward unavailable: ") + e.what());
    }
    try {
      RewardVector v = parse_reward_json(reply, mode_);
      if (mode_ == RewardMode::holistic) {
        v.holistic = clamp_score(v.holistic, "Quality");
      } else {
        v.informativeness = clamp_score(v.informativeness, "Informativeness");
        v.persuasiveness = clamp_score(v.persuasiveness, "Persuasiveness");
      }
      return v;
    } catch (const ParseError& e) {
      last_error = e.what();
    }
  }
  throw ProviderError("reward unavailable: " + last_error);
}

}  // namespace rexplain
