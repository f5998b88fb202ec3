#pragma once

#include <string>
#include <vector>

namespace rexplain {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using Tokens = std::vector<std::string>;

// Clipped n-gram overlap, n in {1, 2}. Empty candidate or reference scores 0.
RougeScore rouge_n(const Tokens& candidate, const Tokens& reference, int n);

// Longest-common-subsequence variant.
RougeScore rouge_l(const Tokens& candidate, const Tokens& reference);

// Sentence-level BLEU: geometric mean of modified n-gram precisions for
// n = 1..max_n with add-one smoothing on zero match counts, times the brevity
// penalty. Orders longer than the candidate are skipped.
double bleu(const Tokens& candidate, const Tokens& reference, int max_n = 4);

// One evaluation sample for the feature matching rate.
struct FmrSample {
  Tokens generated;
  Tokens reference;
  std::vector<Tokens> item_features;  // each feature term, tokenized
};

// Fraction of samples where some item feature appears (as a contiguous token
// run) in both the generated and the reference explanation.
double fmr(const std::vector<FmrSample>& samples);

double rmse(const std::vector<std::pair<double, double>>& truth_pred);
double mae(const std::vector<std::pair<double, double>>& truth_pred);

// Pearson correlation of average-rank vectors. Throws MetricError when either
// input has zero rank variance.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct EvalReport {
  double fmr = 0.0;
  double bleu = 0.0;
  RougeScore rouge1, rouge2, rougeL;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t samples = 0;
};

// Plain-text table with the text metrics scaled by 100.
std::string format_report_table(const EvalReport& report);

}  // namespace rexplain
