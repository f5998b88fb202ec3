#pragma once

#include <vector>

#include "rexplain/advantage.hpp"
#include "rexplain/metrics.hpp"
#include "rexplain/policy.hpp"
#include "rexplain/trainer.hpp"

// Straight-line serial implementations of the parallel kernels, built from
// the public single-example primitives. The tests check the chunked OpenMP
// kernels against these; the benchmark tool compares their wall time.
namespace rexplain::ref {

LossGrad nll_loss(const RecurrentPolicy& policy, const std::vector<TrainExample>& batch);
LossGrad mse_loss(const RecurrentPolicy& policy, const std::vector<TrainExample>& batch);

SurrogateResult surrogate_and_grad(const ReplayBuffer& buffer, const Policy& policy,
                                   std::size_t perspective, double clip);

double fmr(const std::vector<FmrSample>& samples);

}  // namespace rexplain::ref
