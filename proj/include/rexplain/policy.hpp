#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "rexplain/corpus.hpp"
#include "rexplain/rng.hpp"

namespace rexplain {

// One explored explanation. tokens ends with <eos> unless the length cap was
// hit; log_prob is the exact sum of chosen-token log-probabilities under the
// distribution that generated it.
struct SampledExplanation {
  std::vector<int> tokens;
  double log_prob = 0.0;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

struct PretrainConfig {
  int epochs = 60;
  double lr = 1e-3;
  int batch = 128;
  std::uint64_t seed = 0;
};

struct PretrainStats {
  double nll_before = 0.0;
  double nll_after = 0.0;
  double mse_before = 0.0;
  double mse_after = 0.0;
  int steps = 0;
};

// Contract the trainer relies on; any explanation generator with a rating
// head can stand behind it. Parameters are exposed as one flat array so the
// optimizer and the Pareto solver stay model-agnostic.
class Policy {
public:
  virtual ~Policy() = default;

  virtual const Vocabulary& vocab() const = 0;
  virtual int user_count() const = 0;
  virtual int item_count() const = 0;

  virtual std::size_t param_count() const = 0;
  virtual const std::vector<double>& params() const = 0;
  virtual void set_params(std::vector<double> p) = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;

  virtual SampledExplanation sample(int user, int item, double temperature, Rng& rng) const = 0;
  virtual std::vector<int> greedy_decode(int user, int item) const = 0;
  virtual double sequence_log_prob(int user, int item, const std::vector<int>& tokens) const = 0;

  // Adds scale * d(log pi(tokens|user,item))/d(theta) into grad_accum and
  // returns the sequence log-probability.
  virtual double log_prob_accumulate(int user, int item, const std::vector<int>& tokens,
                                     double scale, std::vector<double>& grad_accum) const = 0;

  // Adds scale * d((rating - r_hat)^2)/d(theta) into grad_accum; returns the
  // squared error. Used for the optional auxiliary rating term.
  virtual double mse_accumulate(int user, int item, double rating, double scale,
                                std::vector<double>& grad_accum) const = 0;

  virtual double predict_rating(int user, int item, bool clamp_to_range) const = 0;

  virtual PretrainStats pretrain(const std::vector<TrainExample>& examples,
                                 const PretrainConfig& config) = 0;

  virtual void save_checkpoint(const std::filesystem::path& path) const = 0;
};

// Single-layer recurrent generator: s_0 = tanh(W_u u + W_v v),
// s_t = tanh(W_s s_{t-1} + W_e e(x_t) + b), token logits W_o s_t + b_o,
// rating head w_r^T tanh(W_r [u; v]) + bias. All gradients are hand-derived
// and finite-difference checked in the tests.
class RecurrentPolicy final : public Policy {
public:
  RecurrentPolicy(Vocabulary vocab, int n_users, int n_items, int dim, std::uint64_t seed,
                  int max_len = 15);

  const Vocabulary& vocab() const override { return vocab_; }
  int user_count() const override { return n_users_; }
  int item_count() const override { return n_items_; }
  int dim() const { return dim_; }
  int max_len() const { return max_len_; }
  std::uint64_t init_seed() const { return init_seed_; }

  std::size_t param_count() const override { return params_.size(); }
  const std::vector<double>& params() const override { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  void set_params(std::vector<double> p) override;
  std::unique_ptr<Policy> clone() const override;

  SampledExplanation sample(int user, int item, double temperature, Rng& rng) const override;
  std::vector<int> greedy_decode(int user, int item) const override;
  double sequence_log_prob(int user, int item, const std::vector<int>& tokens) const override;
  double log_prob_accumulate(int user, int item, const std::vector<int>& tokens, double scale,
                             std::vector<double>& grad_accum) const override;
  double mse_accumulate(int user, int item, double rating, double scale,
                        std::vector<double>& grad_accum) const override;
  double predict_rating(int user, int item, bool clamp_to_range) const override;

  // Batch supervised losses; gradients are averaged over the batch. The heavy
  // per-example passes run in parallel over fixed chunks, reduced in chunk
  // order, so results do not depend on the thread count.
  LossGrad mse_loss(const std::vector<TrainExample>& batch) const;
  LossGrad nll_loss(const std::vector<TrainExample>& batch) const;
  double mse_value(const std::vector<TrainExample>& batch) const;
  double nll_value(const std::vector<TrainExample>& batch) const;

  PretrainStats pretrain(const std::vector<TrainExample>& examples,
                         const PretrainConfig& config) override;

  void save_checkpoint(const std::filesystem::path& path) const override;
  static RecurrentPolicy load_checkpoint(const std::filesystem::path& path);

private:
  Vocabulary vocab_;
  int n_users_ = 0;
  int n_items_ = 0;
  int dim_ = 0;
  int max_len_ = 15;
  std::uint64_t init_seed_ = 0;
  std::vector<double> params_;
};

// Adam with bias correction; step() performs one descent update in place.
class AdamOptimizer {
public:
  AdamOptimizer(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(std::vector<double>& params, const std::vector<double>& grad);
  double lr() const { return lr_; }

private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace rexplain
