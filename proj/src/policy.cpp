#include "rexplain/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "rexplain/error.hpp"
#include "rexplain/parallel.hpp"

namespace rexplain {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;

// Flat parameter layout; all matrices row-major.
struct Layout {
  std::size_t user_emb, item_emb, tok_emb;
  std::size_t w_s, w_e, b_rec, w_u, w_v;
  std::size_t w_o, b_out;
  std::size_t w_r, w_r_vec, b_r;
  std::size_t total;

  Layout(int n_users, int n_items, int n_vocab, int d) {
    const auto u = static_cast<std::size_t>(n_users);
    const auto v = static_cast<std::size_t>(n_items);
    const auto w = static_cast<std::size_t>(n_vocab);
    const auto k = static_cast<std::size_t>(d);
    std::size_t at = 0;
    user_emb = at, at += u * k;
    item_emb = at, at += v * k;
    tok_emb = at, at += w * k;
    w_s = at, at += k * k;
    w_e = at, at += k * k;
    b_rec = at, at += k;
    w_u = at, at += k * k;
    w_v = at, at += k * k;
    w_o = at, at += w * k;
    b_out = at, at += w;
    w_r = at, at += k * 2 * k;
    w_r_vec = at, at += k;
    b_r = at, at += 1;
    total = at;
  }
};

// Softmax with max-subtraction; writes probabilities into out.
void stable_softmax(const Eigen::VectorXd& logits, Eigen::VectorXd& out) {
  const double zmax = logits.maxCoeff();
  out = (logits.array() - zmax).exp();
  out /= out.sum();
}

struct SeqTrace {
  RowMat states;  // (T+1) x d, row 0 is the user/item-derived start state
  RowMat probs;   // T x V
};

}  // namespace

RecurrentPolicy::RecurrentPolicy(Vocabulary vocab, int n_users, int n_items, int dim,
                                 std::uint64_t seed, int max_len)
    : vocab_(std::move(vocab)),
      n_users_(n_users),
      n_items_(n_items),
      dim_(dim),
      max_len_(max_len),
      init_seed_(seed) {
  if (dim < 1) throw Error("policy dimension must be >= 1");
  const Layout layout(n_users_, n_items_, vocab_.size(), dim_);
  params_.resize(layout.total);
  Rng rng = stream_rng(seed, 0x90110C);
  for (double& p : params_) p = rng.uniform(-0.1, 0.1);
}

void RecurrentPolicy::set_params(std::vector<double> p) {
  if (p.size() != params_.size()) throw Error("set_params: size mismatch");
  params_ = std::move(p);
}

std::unique_ptr<Policy> RecurrentPolicy::clone() const {
  return std::make_unique<RecurrentPolicy>(*this);
}

namespace {

// Runs the recurrence over `targets` (teacher forcing) and fills the trace.
// Returns the sequence log-probability.
double forward_sequence(const std::vector<double>& params, const Layout& off, int d, int V,
                        int user, int item, const std::vector<int>& targets, SeqTrace& trace) {
  const double* p = params.data();
  CVecMap ue(p + off.user_emb + static_cast<std::size_t>(user) * d, d);
  CVecMap ve(p + off.item_emb + static_cast<std::size_t>(item) * d, d);
  CMatMap W_s(p + off.w_s, d, d), W_e(p + off.w_e, d, d);
  CMatMap W_u(p + off.w_u, d, d), W_v(p + off.w_v, d, d);
  CVecMap b_rec(p + off.b_rec, d);
  CMatMap W_o(p + off.w_o, V, d);
  CVecMap b_out(p + off.b_out, V);

  const int T = static_cast<int>(targets.size());
  trace.states.resize(T + 1, d);
  trace.probs.resize(T, V);

  Eigen::VectorXd state = (W_u * ue + W_v * ve).array().tanh();
  trace.states.row(0) = state.transpose();

  Eigen::VectorXd logits(V), prob(V);
  double log_prob = 0.0;
  for (int t = 0; t < T; ++t) {
    const int consumed = t == 0 ? Vocabulary::bos_id : targets[t - 1];
    CVecMap emb(p + off.tok_emb + static_cast<std::size_t>(consumed) * d, d);
    state = (W_s * state + W_e * emb + b_rec).array().tanh();
    trace.states.row(t + 1) = state.transpose();

    logits = W_o * state + b_out;
    stable_softmax(logits, prob);
    trace.probs.row(t) = prob;
    log_prob += std::log(prob[targets[t]]);
  }
  return log_prob;
}

// Accumulates scale * d(sum_t coeff_t * (-log p_t[target_t]))/d(theta) into
// grad. Plain truncation-free BPTT mirroring forward_sequence.
void backward_sequence(const std::vector<double>& params, const Layout& off, int d, int V,
                       int user, int item, const std::vector<int>& targets,
                       const SeqTrace& trace, const std::vector<double>& coeff, double scale,
                       std::vector<double>& grad) {
  const double* p = params.data();
  double* g = grad.data();
  CVecMap ue(p + off.user_emb + static_cast<std::size_t>(user) * d, d);
  CVecMap ve(p + off.item_emb + static_cast<std::size_t>(item) * d, d);
  CMatMap W_s(p + off.w_s, d, d), W_e(p + off.w_e, d, d);
  CMatMap W_u(p + off.w_u, d, d), W_v(p + off.w_v, d, d);
  CMatMap W_o(p + off.w_o, V, d);

  MatMap dW_s(g + off.w_s, d, d), dW_e(g + off.w_e, d, d);
  MatMap dW_u(g + off.w_u, d, d), dW_v(g + off.w_v, d, d);
  VecMap db_rec(g + off.b_rec, d);
  MatMap dW_o(g + off.w_o, V, d);
  VecMap db_out(g + off.b_out, V);
  VecMap due(g + off.user_emb + static_cast<std::size_t>(user) * d, d);
  VecMap dve(g + off.item_emb + static_cast<std::size_t>(item) * d, d);

  const int T = static_cast<int>(targets.size());
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(d);  // dL/ds[t+1] via recurrence
  Eigen::VectorXd dz(V), ds(d), dpre(d);

  for (int t = T - 1; t >= 0; --t) {
    dz = trace.probs.row(t).transpose() * (coeff[t] * scale);
    dz[targets[t]] -= coeff[t] * scale;

    dW_o.noalias() += dz * trace.states.row(t + 1);
    db_out += dz;

    ds.noalias() = W_o.transpose() * dz;
    ds += carry;
    dpre = ds.array() * (1.0 - trace.states.row(t + 1).transpose().array().square());

    dW_s.noalias() += dpre * trace.states.row(t);
    db_rec += dpre;

    const int consumed = t == 0 ? Vocabulary::bos_id : targets[t - 1];
    CVecMap emb(p + off.tok_emb + static_cast<std::size_t>(consumed) * d, d);
    dW_e.noalias() += dpre * emb.transpose();
    VecMap demb(g + off.tok_emb + static_cast<std::size_t>(consumed) * d, d);
    demb.noalias() += W_e.transpose() * dpre;

    carry.noalias() = W_s.transpose() * dpre;
  }

  dpre = carry.array() * (1.0 - trace.states.row(0).transpose().array().square());
  dW_u.noalias() += dpre * ue.transpose();
  dW_v.noalias() += dpre * ve.transpose();
  due.noalias() += W_u.transpose() * dpre;
  dve.noalias() += W_v.transpose() * dpre;
}

void check_tokens(const std::vector<int>& tokens, int V, const char* where) {
  if (tokens.empty()) throw Error(std::string(where) + ": empty token sequence");
  for (int id : tokens) {
    if (id < 0 || id >= V) throw Error(std::string(where) + ": token id out of range");
  }
}

}  // namespace

SampledExplanation RecurrentPolicy::sample(int user, int item, double temperature,
                                           Rng& rng) const {
  if (temperature <= 0.0) throw Error("sample: temperature must be > 0");
  const int d = dim_, V = vocab_.size();
  const Layout off(n_users_, n_items_, V, d);
  const double* p = params_.data();
  CVecMap ue(p + off.user_emb + static_cast<std::size_t>(user) * d, d);
  CVecMap ve(p + off.item_emb + static_cast<std::size_t>(item) * d, d);
  CMatMap W_s(p + off.w_s, d, d), W_e(p + off.w_e, d, d);
  CMatMap W_u(p + off.w_u, d, d), W_v(p + off.w_v, d, d);
  CVecMap b_rec(p + off.b_rec, d);
  CMatMap W_o(p + off.w_o, V, d);
  CVecMap b_out(p + off.b_out, V);

  SampledExplanation out;
  Eigen::VectorXd state = (W_u * ue + W_v * ve).array().tanh();
  Eigen::VectorXd logits(V), prob(V);

  int consumed = Vocabulary::bos_id;
  while (static_cast<int>(out.tokens.size()) < max_len_) {
    CVecMap emb(p + off.tok_emb + static_cast<std::size_t>(consumed) * d, d);
    state = (W_s * state + W_e * emb + b_rec).array().tanh();
    logits = (W_o * state + b_out) / temperature;
    stable_softmax(logits, prob);

    double r = rng.uniform();
    int chosen = V - 1;
    for (int i = 0; i < V; ++i) {
      r -= prob[i];
      if (r < 0.0) {
        chosen = i;
        break;
      }
    }
    out.tokens.push_back(chosen);
    out.log_prob += std::log(prob[chosen]);
    if (chosen == Vocabulary::eos_id) break;
    consumed = chosen;
  }
  return out;
}

std::vector<int> RecurrentPolicy::greedy_decode(int user, int item) const {
  const int d = dim_, V = vocab_.size();
  const Layout off(n_users_, n_items_, V, d);
  const double* p = params_.data();
  CVecMap ue(p + off.user_emb + static_cast<std::size_t>(user) * d, d);
  CVecMap ve(p + off.item_emb + static_cast<std::size_t>(item) * d, d);
  CMatMap W_s(p + off.w_s, d, d), W_e(p + off.w_e, d, d);
  CMatMap W_u(p + off.w_u, d, d), W_v(p + off.w_v, d, d);
  CVecMap b_rec(p + off.b_rec, d);
  CMatMap W_o(p + off.w_o, V, d);
  CVecMap b_out(p + off.b_out, V);

  std::vector<int> tokens;
  Eigen::VectorXd state = (W_u * ue + W_v * ve).array().tanh();
  Eigen::VectorXd logits(V);

  int consumed = Vocabulary::bos_id;
  while (static_cast<int>(tokens.size()) < max_len_) {
    CVecMap emb(p + off.tok_emb + static_cast<std::size_t>(consumed) * d, d);
    state = (W_s * state + W_e * emb + b_rec).array().tanh();
    logits = W_o * state + b_out;
    int chosen = 0;
    logits.maxCoeff(&chosen);  // ties resolve to the lowest index
    tokens.push_back(chosen);
    if (chosen == Vocabulary::eos_id) break;
    consumed = chosen;
  }
  return tokens;
}

double RecurrentPolicy::sequence_log_prob(int user, int item,
                                          const std::vector<int>& tokens) const {
  check_tokens(tokens, vocab_.size(), "sequence_log_prob");
  const Layout off(n_users_, n_items_, vocab_.size(), dim_);
  SeqTrace trace;
  return forward_sequence(params_, off, dim_, vocab_.size(), user, item, tokens, trace);
}

double RecurrentPolicy::log_prob_accumulate(int user, int item, const std::vector<int>& tokens,
                                            double scale, std::vector<double>& grad_accum) const {
  check_tokens(tokens, vocab_.size(), "log_prob_accumulate");
  if (grad_accum.size() != params_.size()) throw Error("log_prob_accumulate: grad size mismatch");
  const Layout off(n_users_, n_items_, vocab_.size(), dim_);
  SeqTrace trace;
  const double logp =
      forward_sequence(params_, off, dim_, vocab_.size(), user, item, tokens, trace);
  // grad of log-prob is minus the grad of the negative log-likelihood sum
  const std::vector<double> coeff(tokens.size(), 1.0);
  backward_sequence(params_, off, dim_, vocab_.size(), user, item, tokens, trace, coeff, -scale,
                    grad_accum);
  return logp;
}

double RecurrentPolicy::predict_rating(int user, int item, bool clamp_to_range) const {
  const int d = dim_;
  const Layout off(n_users_, n_items_, vocab_.size(), d);
  const double* p = params_.data();
  CVecMap ue(p + off.user_emb + static_cast<std::size_t>(user) * d, d);
  CVecMap ve(p + off.item_emb + static_cast<std::size_t>(item) * d, d);
  CMatMap W_r(p + off.w_r, d, 2 * d);
  CVecMap w_r(p + off.w_r_vec, d);

  Eigen::VectorXd x(2 * d);
  x << ue, ve;
  const Eigen::VectorXd t = (W_r * x).array().tanh();
  double r = w_r.dot(t) + params_[off.b_r];
  if (clamp_to_range) r = std::clamp(r, 1.0, 5.0);
  return r;
}

double RecurrentPolicy::mse_accumulate(int user, int item, double rating, double scale,
                                       std::vector<double>& grad_accum) const {
  const int d = dim_;
  const Layout off(n_users_, n_items_, vocab_.size(), d);
  const double* p = params_.data();
  double* g = grad_accum.data();
  CVecMap ue(p + off.user_emb + static_cast<std::size_t>(user) * d, d);
  CVecMap ve(p + off.item_emb + static_cast<std::size_t>(item) * d, d);
  CMatMap W_r(p + off.w_r, d, 2 * d);
  CVecMap w_r(p + off.w_r_vec, d);

  Eigen::VectorXd x(2 * d);
  x << ue, ve;
  const Eigen::VectorXd a = W_r * x;
  const Eigen::VectorXd t = a.array().tanh();
  const double pred = w_r.dot(t) + params_[off.b_r];
  const double err = rating - pred;

  const double dpred = -2.0 * err * scale;
  VecMap dw_r(g + off.w_r_vec, d);
  dw_r += dpred * t;
  grad_accum[off.b_r] += dpred;

  const Eigen::VectorXd da = (dpred * w_r.array() * (1.0 - t.array().square())).matrix();
  MatMap dW_r(g + off.w_r, d, 2 * d);
  dW_r.noalias() += da * x.transpose();

  const Eigen::VectorXd dx = W_r.transpose() * da;
  VecMap due(g + off.user_emb + static_cast<std::size_t>(user) * d, d);
  VecMap dve(g + off.item_emb + static_cast<std::size_t>(item) * d, d);
  due += dx.head(d);
  dve += dx.tail(d);

  return err * err;
}

namespace {
constexpr std::size_t kChunkGrain = 8;
}

LossGrad RecurrentPolicy::mse_loss(const std::vector<TrainExample>& batch) const {
  if (batch.empty()) throw Error("mse_loss: empty batch");
  const std::size_t n = batch.size();
  const std::size_t chunks = par::chunk_count(n, kChunkGrain);
  std::vector<std::vector<double>> partial(chunks);
  std::vector<double> losses(chunks, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);

  par::chunked(n, kChunkGrain, [&](std::size_t begin, std::size_t end, std::size_t c) {
    partial[c].assign(params_.size(), 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      losses[c] += mse_accumulate(batch[i].user, batch[i].item, batch[i].rating, inv_n, partial[c]);
    }
  });

  LossGrad out;
  out.grad.assign(params_.size(), 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    out.loss += losses[c];
    for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += partial[c][j];
  }
  out.loss *= inv_n;
  return out;
}

LossGrad RecurrentPolicy::nll_loss(const std::vector<TrainExample>& batch) const {
  if (batch.empty()) throw Error("nll_loss: empty batch");
  const int V = vocab_.size();
  const Layout off(n_users_, n_items_, V, dim_);
  const std::size_t n = batch.size();
  const std::size_t chunks = par::chunk_count(n, kChunkGrain);
  std::vector<std::vector<double>> partial(chunks);
  std::vector<double> losses(chunks, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);

  par::chunked(n, kChunkGrain, [&](std::size_t begin, std::size_t end, std::size_t c) {
    partial[c].assign(params_.size(), 0.0);
    SeqTrace trace;
    for (std::size_t i = begin; i < end; ++i) {
      const TrainExample& ex = batch[i];
      check_tokens(ex.tokens, V, "nll_loss");
      const double logp =
          forward_sequence(params_, off, dim_, V, ex.user, ex.item, ex.tokens, trace);
      const double inv_t = 1.0 / static_cast<double>(ex.tokens.size());
      losses[c] += -logp * inv_t;
      const std::vector<double> coeff(ex.tokens.size(), inv_t);
      backward_sequence(params_, off, dim_, V, ex.user, ex.item, ex.tokens, trace, coeff, inv_n,
                        partial[c]);
    }
  });

  LossGrad out;
  out.grad.assign(params_.size(), 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    out.loss += losses[c];
    for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += partial[c][j];
  }
  out.loss *= inv_n;
  return out;
}

double RecurrentPolicy::mse_value(const std::vector<TrainExample>& batch) const {
  if (batch.empty()) throw Error("mse_value: empty batch");
  std::vector<double> errs(batch.size(), 0.0);
  par::for_each(batch.size(), [&](std::size_t i) {
    const double pred = predict_rating(batch[i].user, batch[i].item, false);
    errs[i] = (batch[i].rating - pred) * (batch[i].rating - pred);
  });
  double sum = 0.0;
  for (double e : errs) sum += e;
  return sum / static_cast<double>(batch.size());
}

double RecurrentPolicy::nll_value(const std::vector<TrainExample>& batch) const {
  if (batch.empty()) throw Error("nll_value: empty batch");
  std::vector<double> vals(batch.size(), 0.0);
  par::for_each(batch.size(), [&](std::size_t i) {
    const double logp = sequence_log_prob(batch[i].user, batch[i].item, batch[i].tokens);
    vals[i] = -logp / static_cast<double>(batch[i].tokens.size());
  });
  double sum = 0.0;
  for (double v : vals) sum += v;
  return sum / static_cast<double>(batch.size());
}

PretrainStats RecurrentPolicy::pretrain(const std::vector<TrainExample>& examples,
                                        const PretrainConfig& config) {
  if (examples.empty()) throw Error("pretrain: no examples");
  PretrainStats stats;
  stats.nll_before = nll_value(examples);
  stats.mse_before = mse_value(examples);

  AdamOptimizer adam(params_.size(), config.lr);
  Rng rng = stream_rng(config.seed, 0x93E7);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t batch_size = std::max(1, config.batch);
  std::vector<double> grad(params_.size());
  std::vector<TrainExample> batch;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t at = 0; at < order.size(); at += batch_size) {
      batch.clear();
      for (std::size_t i = at; i < std::min(order.size(), at + batch_size); ++i) {
        batch.push_back(examples[order[i]]);
      }
      const LossGrad nll = nll_loss(batch);
      const LossGrad mse = mse_loss(batch);
      const double loss = nll.loss + mse.loss;
      if (!std::isfinite(loss)) {
        throw DivergenceError("pretrain diverged at epoch " + std::to_string(epoch) +
                              " step " + std::to_string(stats.steps) +
                              " (loss=" + std::to_string(loss) + ")");
      }
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = nll.grad[j] + mse.grad[j];
      adam.step(params_, grad);
      ++stats.steps;
    }
  }

  stats.nll_after = nll_value(examples);
  stats.mse_after = mse_value(examples);
  return stats;
}

void RecurrentPolicy::save_checkpoint(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["format"] = "rexplain-recurrent-policy";
  j["version"] = 1;
  j["dim"] = dim_;
  j["n_users"] = n_users_;
  j["n_items"] = n_items_;
  j["max_len"] = max_len_;
  j["seed"] = init_seed_;
  j["vocab"] = vocab_.tokens;
  j["params"] = params_;
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint to " + path.string());
  out << j.dump();
}

RecurrentPolicy RecurrentPolicy::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open checkpoint");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, std::string("invalid checkpoint JSON: ") + e.what());
  }
  if (j.value("format", "") != "rexplain-recurrent-policy") {
    throw ParseError(path.string(), 0, "unrecognized checkpoint format");
  }
  Vocabulary vocab;
  vocab.tokens = j.at("vocab").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
    vocab.index[vocab.tokens[i]] = static_cast<int>(i);
  }
  RecurrentPolicy policy(std::move(vocab), j.at("n_users").get<int>(), j.at("n_items").get<int>(),
                         j.at("dim").get<int>(), j.at("seed").get<std::uint64_t>(),
                         j.at("max_len").get<int>());
  std::vector<double> params = j.at("params").get<std::vector<double>>();
  if (params.size() != policy.param_count()) {
    throw ParseError(path.string(), 0, "checkpoint parameter count does not match shapes");
  }
  policy.set_params(std::move(params));
  return policy;
}

AdamOptimizer::AdamOptimizer(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error("adam: size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace rexplain
