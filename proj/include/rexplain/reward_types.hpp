#pragma once

#include <vector>

namespace rexplain {

enum class RewardMode { multi_perspective, holistic };

// Judged quality scores, each in [1, 3]. Multi-perspective mode carries the
// two perspective scores; holistic mode carries the single overall score.
struct RewardVector {
  RewardMode mode = RewardMode::multi_perspective;
  double informativeness = 0.0;
  double persuasiveness = 0.0;
  double holistic = 0.0;

  static RewardVector multi(double info, double persv) {
    return {RewardMode::multi_perspective, info, persv, 0.0};
  }
  static RewardVector overall(double q) { return {RewardMode::holistic, 0.0, 0.0, q}; }

  // Active scores in objective order: {info, persv} or {holistic}.
  std::vector<double> perspectives() const {
    if (mode == RewardMode::holistic) return {holistic};
    return {informativeness, persuasiveness};
  }

  bool operator==(const RewardVector&) const = default;
};

}  // namespace rexplain
