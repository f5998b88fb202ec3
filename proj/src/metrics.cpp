#include "rexplain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "rexplain/error.hpp"
#include "rexplain/parallel.hpp"

namespace rexplain {

namespace {

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& toks, int n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)]++;
  }
  return counts;
}

std::size_t clipped_overlap(const Tokens& candidate, const Tokens& reference, int n) {
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool contains_run(const Tokens& haystack, const Tokens& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), haystack.begin() + i)) return true;
  }
  return false;
}

}  // namespace

RougeScore rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
  RougeScore score;
  const std::size_t cand_total = candidate.size() >= static_cast<std::size_t>(n)
                                     ? candidate.size() - n + 1
                                     : 0;
  const std::size_t ref_total =
      reference.size() >= static_cast<std::size_t>(n) ? reference.size() - n + 1 : 0;
  if (cand_total == 0 || ref_total == 0) return score;
  const std::size_t overlap = clipped_overlap(candidate, reference, n);
  score.precision = static_cast<double>(overlap) / static_cast<double>(cand_total);
  score.recall = static_cast<double>(overlap) / static_cast<double>(ref_total);
  score.f1 = f1_of(score.precision, score.recall);
  return score;
}

RougeScore rouge_l(const Tokens& candidate, const Tokens& reference) {
  RougeScore score;
  if (candidate.empty() || reference.empty()) return score;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  score.precision = lcs / static_cast<double>(candidate.size());
  score.recall = lcs / static_cast<double>(reference.size());
  score.f1 = f1_of(score.precision, score.recall);
  return score;
}

double bleu(const Tokens& candidate, const Tokens& reference, int max_n) {
  if (candidate.empty() || reference.empty()) return 0.0;
  double log_sum = 0.0;
  int used_orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    const std::size_t total =
        candidate.size() >= static_cast<std::size_t>(n) ? candidate.size() - n + 1 : 0;
    if (total == 0) continue;  // candidate shorter than this order
    std::size_t match = clipped_overlap(candidate, reference, n);
    double p;
    if (match == 0) {
      p = 1.0 / static_cast<double>(total + 1);  // add-one smoothing
    } else {
      p = static_cast<double>(match) / static_cast<double>(total);
    }
    log_sum += std::log(p);
    ++used_orders;
  }
  if (used_orders == 0) return 0.0;
  const double geo_mean = std::exp(log_sum / used_orders);
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * geo_mean;
}

double fmr(const std::vector<FmrSample>& samples) {
  if (samples.empty()) return 0.0;
  std::vector<int> matched(samples.size(), 0);
  par::for_each(samples.size(), [&](std::size_t i) {
    const FmrSample& s = samples[i];
    for (const Tokens& feature : s.item_features) {
      if (contains_run(s.generated, feature) && contains_run(s.reference, feature)) {
        matched[i] = 1;
        break;
      }
    }
  });
  const double hits = static_cast<double>(std::accumulate(matched.begin(), matched.end(), 0));
  return hits / static_cast<double>(samples.size());
}

double rmse(const std::vector<std::pair<double, double>>& truth_pred) {
  if (truth_pred.empty()) throw MetricError("rmse: empty input");
  double sum = 0.0;
  for (const auto& [truth, pred] : truth_pred) sum += (truth - pred) * (truth - pred);
  return std::sqrt(sum / static_cast<double>(truth_pred.size()));
}

double mae(const std::vector<std::pair<double, double>>& truth_pred) {
  if (truth_pred.empty()) throw MetricError("mae: empty input");
  double sum = 0.0;
  for (const auto& [truth, pred] : truth_pred) sum += std::abs(truth - pred);
  return sum / static_cast<double>(truth_pred.size());
}

namespace {

// Average ranks, 1-based; ties share the mean of the positions they span.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw MetricError("spearman: inputs must have equal length >= 2");
  }
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) {
    throw MetricError("spearman: zero rank variance, correlation undefined");
  }
  return cov / std::sqrt(va * vb);
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  auto row = [&out](const std::string& name, double value) {
    out << std::left << std::setw(8) << name << std::right << std::setw(9) << value << '\n';
  };
  out << "metric      value\n";
  out << "-----------------\n";
  row("FMR", report.fmr * 100.0);
  row("BLEU", report.bleu * 100.0);
  row("R1-P", report.rouge1.precision * 100.0);
  row("R1-R", report.rouge1.recall * 100.0);
  row("R1-F", report.rouge1.f1 * 100.0);
  row("R2-P", report.rouge2.precision * 100.0);
  row("R2-R", report.rouge2.recall * 100.0);
  row("R2-F", report.rouge2.f1 * 100.0);
  row("RL-P", report.rougeL.precision * 100.0);
  row("RL-R", report.rougeL.recall * 100.0);
  row("RL-F", report.rougeL.f1 * 100.0);
  row("RMSE", report.rmse);
  row("MAE", report.mae);
  out << "samples " << std::setw(9) << report.samples << '\n';
  return out.str();
}

}  // namespace rexplain
