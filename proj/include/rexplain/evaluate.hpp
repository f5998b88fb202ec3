#pragma once

#include "rexplain/corpus.hpp"
#include "rexplain/metrics.hpp"
#include "rexplain/policy.hpp"

namespace rexplain {

// Greedy-decodes every test pair and scores it against the held-out
// explanation: FMR / BLEU / ROUGE on the text, RMSE / MAE on the clamped
// rating predictions. Text metrics are macro-averaged over samples.
EvalReport evaluate_on_test(const Corpus& full, const Corpus& test, const Policy& policy);

}  // namespace rexplain
