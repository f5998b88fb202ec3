#include "rexplain/reference.hpp"

#include <algorithm>

#include "rexplain/error.hpp"

namespace rexplain::ref {

LossGrad nll_loss(const RecurrentPolicy& policy, const std::vector<TrainExample>& batch) {
  if (batch.empty()) throw Error("ref::nll_loss: empty batch");
  LossGrad out;
  out.grad.assign(policy.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const TrainExample& ex : batch) {
    const double inv_t = 1.0 / static_cast<double>(ex.tokens.size());
    const double logp =
        policy.log_prob_accumulate(ex.user, ex.item, ex.tokens, -inv_n * inv_t, out.grad);
    out.loss += -logp * inv_t * inv_n;
  }
  return out;
}

LossGrad mse_loss(const RecurrentPolicy& policy, const std::vector<TrainExample>& batch) {
  if (batch.empty()) throw Error("ref::mse_loss: empty batch");
  LossGrad out;
  out.grad.assign(policy.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const TrainExample& ex : batch) {
    out.loss += policy.mse_accumulate(ex.user, ex.item, ex.rating, inv_n, out.grad) * inv_n;
  }
  return out;
}

SurrogateResult surrogate_and_grad(const ReplayBuffer& buffer, const Policy& policy,
                                   std::size_t perspective, double clip) {
  if (buffer.empty()) throw Error("ref::surrogate_and_grad: empty buffer");
  SurrogateResult out;
  out.grad.assign(policy.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(buffer.size());
  for (const Trajectory& t : buffer.entries()) {
    if (!t.advantages || perspective >= t.advantages->size()) {
      throw Error("ref::surrogate_and_grad: advantages missing");
    }
    const double logp = policy.sequence_log_prob(t.user, t.item, t.tokens);
    const ClippedTerm term =
        clipped_term(logp, t.logp_behavior, (*t.advantages)[perspective], clip);
    out.value += term.value * inv_n;
    if (term.d_dlogp_new != 0.0) {
      policy.log_prob_accumulate(t.user, t.item, t.tokens, term.d_dlogp_new * inv_n, out.grad);
    }
  }
  return out;
}

double fmr(const std::vector<FmrSample>& samples) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const FmrSample& s : samples) {
    for (const Tokens& feature : s.item_features) {
      auto contains = [&](const Tokens& hay) {
        if (feature.empty() || feature.size() > hay.size()) return false;
        for (std::size_t i = 0; i + feature.size() <= hay.size(); ++i) {
          if (std::equal(feature.begin(), feature.end(), hay.begin() + i)) return true;
        }
        return false;
      };
      if (contains(s.generated) && contains(s.reference)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace rexplain::ref
