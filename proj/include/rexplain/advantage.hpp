#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rexplain/reward_types.hpp"

namespace rexplain {

// One explored explanation with its judged rewards and the behavior policy's
// log-probability; advantages are filled in between the two phases.
struct Trajectory {
  std::string user_id;
  std::string item_id;
  int user = 0;  // corpus indices, kept alongside the ids for fast lookup
  int item = 0;
  std::vector<int> tokens;
  RewardVector rewards;
  double logp_behavior = 0.0;
  std::optional<std::vector<double>> advantages;  // one entry per perspective

  bool operator==(const Trajectory&) const = default;
};

struct AdvantageStats {
  std::size_t groups = 0;
  std::size_t singleton_groups_dropped = 0;
};

// Append-only trajectory store grouped by (user, item).
class ReplayBuffer {
public:
  void append(Trajectory t) { entries_.push_back(std::move(t)); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Trajectory>& entries() const { return entries_; }
  std::vector<Trajectory>& entries() { return entries_; }

  // Group indices keyed by (user_id, item_id), in first-seen order.
  std::vector<std::vector<std::size_t>> groups() const;

  bool operator==(const ReplayBuffer&) const = default;

private:
  std::vector<Trajectory> entries_;
};

// Replaces every reward with its group-relative advantage, perspective by
// perspective: A(x_i) = psi(x_i) - mean_j psi(x_j) within the (user, item)
// group. Groups that shrank to a single trajectory are dropped (their
// advantage would always be zero) and counted.
AdvantageStats group_advantages(ReplayBuffer& buffer);

// JSONL round trip at full precision.
void persist(const ReplayBuffer& buffer, const std::filesystem::path& path);
ReplayBuffer load_buffer(const std::filesystem::path& path);

}  // namespace rexplain
