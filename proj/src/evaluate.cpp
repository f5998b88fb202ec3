#include "rexplain/evaluate.hpp"

#include "rexplain/error.hpp"
#include "rexplain/parallel.hpp"

namespace rexplain {

EvalReport evaluate_on_test(const Corpus& full, const Corpus& test, const Policy& policy) {
  if (test.interactions.empty()) throw Error("evaluate_on_test: empty test split");
  const std::size_t n = test.interactions.size();

  struct Row {
    double bleu = 0.0;
    RougeScore r1, r2, rl;
    FmrSample fmr;
    double truth = 0.0;
    double pred = 0.0;
  };
  std::vector<Row> rows(n);

  par::for_each(n, [&](std::size_t i) {
    const Interaction& x = test.interactions[i];
    const int user = static_cast<int>(full.user_index.at(x.user_id));
    const int item = static_cast<int>(full.item_index.at(x.item_id));
    const Item& target = full.items[static_cast<std::size_t>(item)];

    const std::vector<int> ids = policy.greedy_decode(user, item);
    const Tokens generated = word_tokens(policy.vocab().decode(ids));
    const Tokens reference = word_tokens(x.explanation);

    Row& row = rows[i];
    row.bleu = bleu(generated, reference);
    row.r1 = rouge_n(generated, reference, 1);
    row.r2 = rouge_n(generated, reference, 2);
    row.rl = rouge_l(generated, reference);
    row.fmr.generated = generated;
    row.fmr.reference = reference;
    for (const std::string& f : target.features) row.fmr.item_features.push_back(word_tokens(f));
    row.truth = x.rating;
    row.pred = policy.predict_rating(user, item, /*clamp_to_range=*/true);
  });

  EvalReport report;
  report.samples = n;
  std::vector<FmrSample> fmr_samples;
  std::vector<std::pair<double, double>> ratings;
  auto add = [](RougeScore& acc, const RougeScore& s) {
    acc.precision += s.precision;
    acc.recall += s.recall;
    acc.f1 += s.f1;
  };
  for (const Row& row : rows) {
    report.bleu += row.bleu;
    add(report.rouge1, row.r1);
    add(report.rouge2, row.r2);
    add(report.rougeL, row.rl);
    fmr_samples.push_back(row.fmr);
    ratings.emplace_back(row.truth, row.pred);
  }
  const double inv = 1.0 / static_cast<double>(n);
  report.bleu *= inv;
  for (RougeScore* s : {&report.rouge1, &report.rouge2, &report.rougeL}) {
    s->precision *= inv;
    s->recall *= inv;
    s->f1 *= inv;
  }
  report.fmr = fmr(fmr_samples);
  report.rmse = rmse(ratings);
  report.mae = mae(ratings);
  return report;
}

}  // namespace rexplain
