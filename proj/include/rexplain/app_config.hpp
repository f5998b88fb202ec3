#pragma once

#include <filesystem>
#include <string>

#include "rexplain/prompts.hpp"
#include "rexplain/rewards.hpp"
#include "rexplain/trainer.hpp"

namespace rexplain {

enum class ProviderKind { simulated, remote };
enum class EmbeddingKind { local, remote };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::simulated;
  ChatEndpointConfig chat;
  bool remote_fewshot = false;  // ask the endpoint for customized examples
  EmbeddingKind embedding_kind = EmbeddingKind::local;
  std::size_t local_embedding_dim = 64;
  EmbeddingEndpointConfig embedding;
};

struct AppConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "out";
  std::filesystem::path lexicon_path = "assets/persuasion_lexicon.txt";
  std::filesystem::path prototypes_path = "assets/prompt_prototypes.jsonl";
  std::uint64_t seed = 7;
  int policy_dim = 16;
  int policy_max_len = 15;
  std::size_t vocab_min_freq = 1;
  TrainConfig train;  // carries the pretrain settings too
  ProviderConfig provider;
};

// Parses and validates a config file. Unknown keys and invalid values are
// ConfigErrors carrying the full field path.
AppConfig load_app_config(const std::filesystem::path& path);

// Validates invariants (ranges, enums, constraint shapes) on a ready config.
void validate_app_config(const AppConfig& config);

}  // namespace rexplain
