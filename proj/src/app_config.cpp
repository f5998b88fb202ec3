#include "rexplain/app_config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "rexplain/error.hpp"

namespace rexplain {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& prefix) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.contains(it.key())) {
      throw ConfigError(prefix + it.key() + ": unknown key");
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& prefix) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(prefix + key + ": wrong type");
  }
}

void read_path(const json& obj, const char* key, std::filesystem::path& out,
               const std::string& prefix) {
  std::string s = out.string();
  read(obj, key, s, prefix);
  out = s;
}

void parse_provider(const json& obj, ProviderConfig& out, const std::string& prefix) {
  reject_unknown(obj,
                 {"kind", "base_url", "chat_path", "model", "temperature", "max_retries",
                  "max_in_flight", "timeout_seconds", "api_key_env", "remote_fewshot",
                  "embedding"},
                 prefix);
  std::string kind = out.kind == ProviderKind::remote ? "remote" : "simulated";
  read(obj, "kind", kind, prefix);
  if (kind == "simulated") {
    out.kind = ProviderKind::simulated;
  } else if (kind == "remote") {
    out.kind = ProviderKind::remote;
  } else {
    throw ConfigError(prefix + "kind: must be \"simulated\" or \"remote\"");
  }
  read(obj, "base_url", out.chat.base_url, prefix);
  read(obj, "chat_path", out.chat.path, prefix);
  read(obj, "model", out.chat.model, prefix);
  read(obj, "temperature", out.chat.temperature, prefix);
  read(obj, "max_retries", out.chat.max_retries, prefix);
  read(obj, "max_in_flight", out.chat.max_in_flight, prefix);
  read(obj, "timeout_seconds", out.chat.timeout_seconds, prefix);
  read(obj, "api_key_env", out.chat.api_key_env, prefix);
  read(obj, "remote_fewshot", out.remote_fewshot, prefix);

  if (auto it = obj.find("embedding"); it != obj.end()) {
    const std::string eprefix = prefix + "embedding.";
    reject_unknown(*it,
                   {"kind", "dim", "base_url", "path", "model", "max_retries", "max_in_flight",
                    "timeout_seconds", "api_key_env"},
                   eprefix);
    std::string ekind = out.embedding_kind == EmbeddingKind::remote ? "remote" : "local";
    read(*it, "kind", ekind, eprefix);
    if (ekind == "local") {
      out.embedding_kind = EmbeddingKind::local;
      read(*it, "dim", out.local_embedding_dim, eprefix);
    } else if (ekind == "remote") {
      out.embedding_kind = EmbeddingKind::remote;
      read(*it, "dim", out.embedding.dim, eprefix);
    } else {
      throw ConfigError(eprefix + "kind: must be \"local\" or \"remote\"");
    }
    read(*it, "base_url", out.embedding.base_url, eprefix);
    read(*it, "path", out.embedding.path, eprefix);
    read(*it, "model", out.embedding.model, eprefix);
    read(*it, "max_retries", out.embedding.max_retries, eprefix);
    read(*it, "max_in_flight", out.embedding.max_in_flight, eprefix);
    read(*it, "timeout_seconds", out.embedding.timeout_seconds, eprefix);
    read(*it, "api_key_env", out.embedding.api_key_env, eprefix);
  }
}

void parse_constraints(const json& arr, std::vector<PreferenceConstraint>& out,
                       const std::string& prefix) {
  if (!arr.is_array()) throw ConfigError(prefix + ": must be an array");
  out.clear();
  for (std::size_t q = 0; q < arr.size(); ++q) {
    const std::string cprefix = prefix + "[" + std::to_string(q) + "].";
    const json& c = arr[q];
    if (!c.is_object()) throw ConfigError(cprefix + ": must be an object");
    reject_unknown(c, {"h", "beta"}, cprefix);
    PreferenceConstraint pc;
    if (!c.contains("h") || !c.contains("beta")) {
      throw ConfigError(cprefix + ": needs \"h\" and \"beta\"");
    }
    read(c, "h", pc.h, cprefix);
    read(c, "beta", pc.beta, cprefix);
    out.push_back(std::move(pc));
  }
}

}  // namespace

AppConfig load_app_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");

  AppConfig config;
  reject_unknown(root,
                 {"data_dir", "out_dir", "seed", "assets", "policy", "vocab", "pretrain", "train",
                  "retrieval", "eval", "provider"},
                 "");
  read_path(root, "data_dir", config.data_dir, "");
  read_path(root, "out_dir", config.out_dir, "");
  read(root, "seed", config.seed, "");

  if (auto it = root.find("assets"); it != root.end()) {
    reject_unknown(*it, {"lexicon", "prototypes"}, "assets.");
    read_path(*it, "lexicon", config.lexicon_path, "assets.");
    read_path(*it, "prototypes", config.prototypes_path, "assets.");
  }
  if (auto it = root.find("policy"); it != root.end()) {
    reject_unknown(*it, {"dim", "max_len"}, "policy.");
    read(*it, "dim", config.policy_dim, "policy.");
    read(*it, "max_len", config.policy_max_len, "policy.");
  }
  if (auto it = root.find("vocab"); it != root.end()) {
    reject_unknown(*it, {"min_freq"}, "vocab.");
    read(*it, "min_freq", config.vocab_min_freq, "vocab.");
  }
  if (auto it = root.find("pretrain"); it != root.end()) {
    reject_unknown(*it, {"epochs", "lr", "batch", "seed"}, "pretrain.");
    read(*it, "epochs", config.train.pretrain.epochs, "pretrain.");
    read(*it, "lr", config.train.pretrain.lr, "pretrain.");
    read(*it, "batch", config.train.pretrain.batch, "pretrain.");
    read(*it, "seed", config.train.pretrain.seed, "pretrain.");
  }
  if (auto it = root.find("train"); it != root.end()) {
    reject_unknown(*it,
                   {"iterations", "epochs", "explore", "clip", "lr", "batch", "sample_budget",
                    "observed_per_iteration", "explore_temperature", "reward_mode",
                    "aux_rating_weight", "constraints"},
                   "train.");
    read(*it, "iterations", config.train.iterations, "train.");
    read(*it, "epochs", config.train.epochs, "train.");
    read(*it, "explore", config.train.explore, "train.");
    read(*it, "clip", config.train.clip, "train.");
    read(*it, "lr", config.train.lr, "train.");
    read(*it, "batch", config.train.batch, "train.");
    read(*it, "sample_budget", config.train.sample_budget, "train.");
    read(*it, "observed_per_iteration", config.train.observed_per_iteration, "train.");
    read(*it, "explore_temperature", config.train.explore_temperature, "train.");
    read(*it, "aux_rating_weight", config.train.aux_rating_weight, "train.");
    std::string mode =
        config.train.reward_mode == RewardMode::holistic ? "holistic" : "multi";
    read(*it, "reward_mode", mode, "train.");
    if (mode == "multi") {
      config.train.reward_mode = RewardMode::multi_perspective;
    } else if (mode == "holistic") {
      config.train.reward_mode = RewardMode::holistic;
    } else {
      throw ConfigError("train.reward_mode: must be \"multi\" or \"holistic\"");
    }
    if (it->contains("constraints")) {
      parse_constraints((*it)["constraints"], config.train.constraints, "train.constraints");
    }
  }
  if (auto it = root.find("retrieval"); it != root.end()) {
    reject_unknown(*it, {"top_k", "clusters"}, "retrieval.");
    read(*it, "top_k", config.train.top_k, "retrieval.");
    read(*it, "clusters", config.train.clusters, "retrieval.");
  }
  if (auto it = root.find("eval"); it != root.end()) {
    reject_unknown(*it, {"probe_pairs"}, "eval.");
    read(*it, "probe_pairs", config.train.probe_pairs, "eval.");
  }
  if (auto it = root.find("provider"); it != root.end()) {
    parse_provider(*it, config.provider, "provider.");
  }

  validate_app_config(config);
  return config;
}

void validate_app_config(const AppConfig& config) {
  const TrainConfig& t = config.train;
  if (t.iterations < 1) throw ConfigError("train.iterations: must be >= 1");
  if (t.epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (t.explore < 1) throw ConfigError("train.explore: must be >= 1");
  if (!(t.clip > 0.0 && t.clip < 1.0)) throw ConfigError("train.clip: must be in (0, 1)");
  if (!(t.lr > 0.0)) throw ConfigError("train.lr: must be > 0");
  if (t.batch < 1) throw ConfigError("train.batch: must be >= 1");
  if (!(t.explore_temperature > 0.0)) {
    throw ConfigError("train.explore_temperature: must be > 0");
  }
  if (t.aux_rating_weight < 0.0) throw ConfigError("train.aux_rating_weight: must be >= 0");
  const std::size_t m = t.reward_mode == RewardMode::holistic ? 1 : 2;
  for (std::size_t q = 0; q < t.constraints.size(); ++q) {
    const auto& c = t.constraints[q];
    const std::string prefix = "train.constraints[" + std::to_string(q) + "].";
    if (c.h.size() != m) throw ConfigError(prefix + "h: needs one entry per perspective");
    double sum = 0.0;
    for (double v : c.h) {
      if (v < 0.0) throw ConfigError(prefix + "h: entries must be >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(prefix + "h: entries must sum to 1");
  }
  if (config.policy_dim < 1) throw ConfigError("policy.dim: must be >= 1");
  if (config.policy_max_len < 1) throw ConfigError("policy.max_len: must be >= 1");
  if (t.top_k < 1) throw ConfigError("retrieval.top_k: must be >= 1");
  if (t.clusters < 1) throw ConfigError("retrieval.clusters: must be >= 1");
  if (config.train.pretrain.epochs < 0) throw ConfigError("pretrain.epochs: must be >= 0");
  if (!(config.train.pretrain.lr >= 0.0)) throw ConfigError("pretrain.lr: must be >= 0");
  if (config.train.pretrain.batch < 1) throw ConfigError("pretrain.batch: must be >= 1");
}

}  // namespace rexplain
