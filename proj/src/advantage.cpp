#include "rexplain/advantage.hpp"

#include <fstream>

#include <json.hpp>

#include "rexplain/error.hpp"
#include "rexplain/jsonl.hpp"

namespace rexplain {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<std::vector<std::size_t>> ReplayBuffer::groups() const {
  std::vector<std::vector<std::size_t>> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto key = std::make_pair(entries_[i].user_id, entries_[i].item_id);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      out.push_back({i});
    } else {
      out[it->second].push_back(i);
    }
  }
  return out;
}

AdvantageStats group_advantages(ReplayBuffer& buffer) {
  AdvantageStats stats;
  std::vector<bool> keep(buffer.size(), true);

  for (const auto& group : buffer.groups()) {
    if (group.size() < 2) {
      for (std::size_t idx : group) keep[idx] = false;
      ++stats.singleton_groups_dropped;
      continue;
    }
    ++stats.groups;

    const std::size_t n_persp = buffer.entries()[group.front()].rewards.perspectives().size();
    std::vector<double> mean(n_persp, 0.0);
    for (std::size_t idx : group) {
      const auto values = buffer.entries()[idx].rewards.perspectives();
      if (values.size() != n_persp) {
        throw Error("group_advantages: mixed reward modes within a group");
      }
      for (std::size_t k = 0; k < n_persp; ++k) mean[k] += values[k];
    }
    for (double& m : mean) m /= static_cast<double>(group.size());

    for (std::size_t idx : group) {
      const auto values = buffer.entries()[idx].rewards.perspectives();
      std::vector<double> adv(n_persp);
      for (std::size_t k = 0; k < n_persp; ++k) adv[k] = values[k] - mean[k];
      buffer.entries()[idx].advantages = std::move(adv);
    }
  }

  if (stats.singleton_groups_dropped > 0) {
    std::vector<Trajectory> kept;
    kept.reserve(buffer.size());
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      if (keep[i]) kept.push_back(std::move(buffer.entries()[i]));
    }
    buffer.entries() = std::move(kept);
  }
  return stats;
}

namespace {

ordered_json rewards_to_json(const RewardVector& r) {
  ordered_json j;
  if (r.mode == RewardMode::holistic) {
    j["holistic"] = r.holistic;
  } else {
    j["info"] = r.informativeness;
    j["persv"] = r.persuasiveness;
  }
  return j;
}

RewardVector rewards_from_json(const json& j, const std::filesystem::path& path,
                               std::size_t lineno) {
  if (j.contains("holistic")) return RewardVector::overall(j["holistic"].get<double>());
  if (!j.contains("info") || !j.contains("persv")) {
    throw ParseError(path.string(), lineno, "rewards need either {info, persv} or {holistic}");
  }
  return RewardVector::multi(j["info"].get<double>(), j["persv"].get<double>());
}

}  // namespace

void persist(const ReplayBuffer& buffer, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write buffer to " + path.string());
  for (const Trajectory& t : buffer.entries()) {
    ordered_json rec;
    rec["user"] = t.user_id;
    rec["item"] = t.item_id;
    rec["user_idx"] = t.user;
    rec["item_idx"] = t.item;
    rec["tokens"] = t.tokens;
    rec["rewards"] = rewards_to_json(t.rewards);
    rec["logp_b"] = t.logp_behavior;
    if (t.advantages) {
      // same keys as the rewards object
      ordered_json adv;
      if (t.rewards.mode == RewardMode::holistic) {
        adv["holistic"] = (*t.advantages)[0];
      } else {
        adv["info"] = (*t.advantages)[0];
        adv["persv"] = (*t.advantages)[1];
      }
      rec["advantages"] = std::move(adv);
    } else {
      rec["advantages"] = nullptr;
    }
    out << rec.dump() << '\n';
  }
}

ReplayBuffer load_buffer(const std::filesystem::path& path) {
  ReplayBuffer buffer;
  for_each_jsonl_line(path, [&](const json& rec, std::size_t lineno) {
    Trajectory t;
    t.user_id = require_field<std::string>(rec, "user", path, lineno);
    t.item_id = require_field<std::string>(rec, "item", path, lineno);
    t.user = require_field<int>(rec, "user_idx", path, lineno);
    t.item = require_field<int>(rec, "item_idx", path, lineno);
    t.tokens = require_field<std::vector<int>>(rec, "tokens", path, lineno);
    if (!rec.contains("rewards") || !rec["rewards"].is_object()) {
      throw ParseError(path.string(), lineno, "missing \"rewards\" object");
    }
    t.rewards = rewards_from_json(rec["rewards"], path, lineno);
    t.logp_behavior = require_field<double>(rec, "logp_b", path, lineno);
    if (!rec.contains("advantages")) {
      throw ParseError(path.string(), lineno, "missing \"advantages\" field");
    }
    if (!rec["advantages"].is_null()) {
      const json& adv = rec["advantages"];
      if (adv.contains("holistic")) {
        t.advantages = std::vector<double>{adv["holistic"].get<double>()};
      } else if (adv.contains("info") && adv.contains("persv")) {
        t.advantages =
            std::vector<double>{adv["info"].get<double>(), adv["persv"].get<double>()};
      } else {
        throw ParseError(path.string(), lineno,
                         "advantages need either {info, persv} or {holistic}");
      }
    }
    buffer.append(std::move(t));
  });
  return buffer;
}

}  // namespace rexplain
