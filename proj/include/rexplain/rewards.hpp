#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "rexplain/corpus.hpp"
#include "rexplain/prompts.hpp"
#include "rexplain/reward_types.hpp"

namespace rexplain {

// Everything a provider may need to judge one explanation.
struct ScoringContext {
  const Item* target = nullptr;
  std::string history_block;               // formatted top-K history blocks
  std::vector<FewshotExample> examples;    // customized (or prototype) examples
  RewardMode mode = RewardMode::multi_perspective;
};

class RewardProvider {
public:
  virtual ~RewardProvider() = default;
  // Providers that only look at the target item (like the simulator) let the
  // collector skip building prompt text.
  virtual bool needs_prompt_text() const { return false; }
  virtual RewardVector score(const ScoringContext& ctx,
                             const std::vector<std::string>& explanation_tokens) const = 0;
};

// Word list used by the persuasiveness rubric; one term per line, '#'
// comments allowed.
std::vector<std::string> load_lexicon(const std::filesystem::path& path);

// Deterministic rubric standing in for a judge:
//   informativeness = 1 + min(2, #distinct target features present)
//   persuasiveness  = 1 + min(2, #distinct lexicon terms present)
// Terms match as contiguous token runs, so multi-word terms work too.
RewardVector simulated_score(const std::vector<std::string>& explanation_tokens,
                             const Item& target, const std::vector<std::string>& lexicon,
                             RewardMode mode = RewardMode::multi_perspective);

class SimulatedProvider final : public RewardProvider {
public:
  explicit SimulatedProvider(std::vector<std::string> lexicon,
                             RewardMode mode = RewardMode::multi_perspective)
      : lexicon_(std::move(lexicon)), mode_(mode) {}
  RewardVector score(const ScoringContext& ctx,
                     const std::vector<std::string>& explanation_tokens) const override {
    return simulated_score(explanation_tokens, *ctx.target, lexicon_, mode_);
  }

private:
  std::vector<std::string> lexicon_;
  RewardMode mode_;
};

// Pulls the first JSON object out of free-form reply text and reads the
// scores (integers or numeric strings, keys case-insensitive). Multi mode
// needs both perspective keys, holistic mode the "Quality" key. Throws
// ParseError otherwise.
RewardVector parse_reward_json(const std::string& text,
                               RewardMode mode = RewardMode::multi_perspective);

struct ChatEndpointConfig {
  std::string base_url = "http://localhost:8080";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_retries = 2;       // retries after the first attempt
  int timeout_seconds = 30;
  int max_in_flight = 8;     // concurrent request cap
  std::string api_key_env = "REXPLAIN_API_KEY";
};

// Minimal chat-completions client with exponential backoff and a bounded
// number of concurrent requests.
class ChatClient {
public:
  explicit ChatClient(ChatEndpointConfig config)
      : config_(std::move(config)),
        gate_(std::max(1, std::min(config_.max_in_flight, 256))) {}
  // Sends one user message, returns the first choice's content.
  std::string complete(const std::string& prompt) const;
  const ChatEndpointConfig& config() const { return config_; }

private:
  ChatEndpointConfig config_;
  mutable std::counting_semaphore<256> gate_;
};

// LLM judge: formats the reward prompt, queries the endpoint, parses the
// reply. Unparseable replies count as transport failures and are retried;
// after the retry budget a ProviderError is thrown (the caller drops the
// trajectory). Out-of-range scores are clamped with a warning.
class RemoteProvider final : public RewardProvider {
public:
  RemoteProvider(ChatEndpointConfig config, RewardMode mode = RewardMode::multi_perspective)
      : client_(std::move(config)), mode_(mode) {}
  bool needs_prompt_text() const override { return true; }
  RewardVector score(const ScoringContext& ctx,
                     const std::vector<std::string>& explanation_tokens) const override;

private:
  ChatClient client_;
  RewardMode mode_;
};

}  // namespace rexplain
