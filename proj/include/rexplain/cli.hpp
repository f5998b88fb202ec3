#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rexplain/app_config.hpp"
#include "rexplain/prompts.hpp"
#include "rexplain/rewards.hpp"
#include "rexplain/trainer.hpp"

namespace rexplain {

// Owns the provider objects selected by the config.
struct ProviderBundle {
  std::unique_ptr<RewardProvider> reward;
  std::unique_ptr<EmbeddingProvider> embedding;
  std::unique_ptr<ChatClient> fewshot;
  std::vector<PromptPrototype> prototypes;

  Providers view() const {
    Providers p;
    p.reward = reward.get();
    p.embedding = embedding.get();
    p.prototypes = prototypes.empty() ? nullptr : &prototypes;
    p.fewshot_client = fewshot.get();
    return p;
  }
};

ProviderBundle make_providers(const AppConfig& config);

// Dispatches gen-data | pretrain | train | eval | solve-pareto | sweep-beta.
// Returns the process exit status: 0 on success, 2 on configuration or usage
// errors, 1 on runtime errors.
int run_cli(const std::vector<std::string>& args);

}  // namespace rexplain
