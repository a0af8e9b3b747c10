#pragma once

// Desk-scale conditional sequence model: token embeddings on both sides,
// dot-product attention over the source, one tanh hidden layer, and a linear
// projection to vocabulary scores. The attention output is a weighted mean of
// raw source embeddings; fixed sinusoidal position vectors enter only the
// attention queries and keys, which lets the model learn monotone alignments
// without adding parameters. Trained by manual backpropagation through any
// Fenchel-Young smoothed loss.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fyseq/entmax.hpp"
#include "fyseq/losses.hpp"
#include "fyseq/rng.hpp"
#include "fyseq/vocab.hpp"

namespace fyseq {

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

struct ModelDims {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t context_len = 3;  // decoder window size n
};

// Sinusoidal position vector, written into `out`.
inline void position_encoding(std::size_t position, std::span<double> out) {
  const std::size_t d = out.size();
  for (std::size_t i = 0; i < d; i += 2) {
    const double rate = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
    const double angle = static_cast<double>(position) * rate;
    out[i] = std::sin(angle);
    if (i + 1 < d) out[i + 1] = std::cos(angle);
  }
}

namespace detail {

// Memoized per thread; encodings are pure functions of (position, d).
inline std::span<const double> position_code(std::size_t position, std::size_t d) {
  struct Cache {
    std::size_t dim = 0;
    std::vector<std::vector<double>> rows;
  };
  thread_local Cache cache;
  if (cache.dim != d) {
    cache.dim = d;
    cache.rows.clear();
  }
  while (cache.rows.size() <= position) {
    std::vector<double> row(d);
    position_encoding(cache.rows.size(), row);
    cache.rows.push_back(std::move(row));
  }
  return cache.rows[position];
}

}  // namespace detail

class Seq2SeqModel {
 public:
  Vocabulary vocab;
  ModelDims dims;
  SmoothingSpec smoothing;

  Matrix source_embeddings;  // V x d
  Matrix target_embeddings;  // V x d
  Matrix attention_query;    // d x d
  Matrix hidden_weights;     // h x (n+1)d
  Matrix hidden_bias;        // h x 1
  Matrix output_weights;     // V x h
  Matrix output_bias;        // V x 1

  Seq2SeqModel(Vocabulary v, ModelDims md, SmoothingSpec sm)
      : vocab(std::move(v)), dims(md), smoothing(std::move(sm)) {
    const std::size_t V = vocab.size(), d = dims.embed_dim, h = dims.hidden_dim;
    const std::size_t ctx = (dims.context_len + 1) * d;
    source_embeddings = Matrix(V, d);
    target_embeddings = Matrix(V, d);
    attention_query = Matrix(d, d);
    hidden_weights = Matrix(h, ctx);
    hidden_bias = Matrix(h, 1);
    output_weights = Matrix(V, h);
    output_bias = Matrix(V, 1);
  }

  // Uniform [-0.1, 0.1] initialization from a seeded generator.
  static Seq2SeqModel init(Vocabulary v, ModelDims md, SmoothingSpec sm, std::uint64_t seed);

  template <typename Fn>
  void for_each_parameter(Fn&& fn) {
    fn("source_embeddings", source_embeddings);
    fn("target_embeddings", target_embeddings);
    fn("attention_query", attention_query);
    fn("hidden_weights", hidden_weights);
    fn("hidden_bias", hidden_bias);
    fn("output_weights", output_weights);
    fn("output_bias", output_bias);
  }

  std::size_t vocab_size() const { return vocab.size(); }
  int eos_index() const { return Vocabulary::kEos; }
  Alpha alpha() const { return smoothing.alpha; }

  SimplexDistribution step_distribution(std::span<const int> source,
                                        std::span<const int> prefix) const;
};

// Parameter-shaped gradient (or moment) buffers.
struct ParamBlock {
  Matrix source_embeddings, target_embeddings, attention_query;
  Matrix hidden_weights, hidden_bias, output_weights, output_bias;

  static ParamBlock zeros_like(const Seq2SeqModel& m) {
    ParamBlock b;
    b.source_embeddings = Matrix(m.source_embeddings.rows, m.source_embeddings.cols);
    b.target_embeddings = Matrix(m.target_embeddings.rows, m.target_embeddings.cols);
    b.attention_query = Matrix(m.attention_query.rows, m.attention_query.cols);
    b.hidden_weights = Matrix(m.hidden_weights.rows, m.hidden_weights.cols);
    b.hidden_bias = Matrix(m.hidden_bias.rows, m.hidden_bias.cols);
    b.output_weights = Matrix(m.output_weights.rows, m.output_weights.cols);
    b.output_bias = Matrix(m.output_bias.rows, m.output_bias.cols);
    return b;
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("source_embeddings", source_embeddings);
    fn("target_embeddings", target_embeddings);
    fn("attention_query", attention_query);
    fn("hidden_weights", hidden_weights);
    fn("hidden_bias", hidden_bias);
    fn("output_weights", output_weights);
    fn("output_bias", output_bias);
  }
};

namespace detail {

struct StepTrace {
  std::vector<int> window;            // context_len token ids, BOS-padded
  std::size_t step = 0;               // decoder position (= prefix length)
  std::vector<int> attended;          // non-PAD source tokens with <eos> appended
  std::vector<double> query_input;    // d
  std::vector<double> query;          // d
  std::vector<double> attn_weights;   // one per attended position
  std::vector<double> context;        // (n+1) d: window embeddings then attention mean
  std::vector<double> hidden;         // h, post-tanh
  LogitVector logits;                 // V
};

inline void check_token(int t, std::size_t vocab_size) {
  if (t < 0 || static_cast<std::size_t>(t) >= vocab_size)
    throw UnknownToken("token index out of range: " + std::to_string(t));
}

inline StepTrace forward_trace(const Seq2SeqModel& m, std::span<const int> source,
                               std::span<const int> prefix) {
  const std::size_t V = m.vocab.size(), d = m.dims.embed_dim, h = m.dims.hidden_dim;
  const std::size_t n = m.dims.context_len;
  if (source.empty()) throw std::invalid_argument("source must be nonempty");
  for (int t : source) check_token(t, V);
  for (int t : prefix) check_token(t, V);

  StepTrace tr;
  tr.step = prefix.size();

  // last n tokens of (BOS ... BOS ++ prefix)
  tr.window.assign(n, Vocabulary::kBos);
  for (std::size_t k = 0; k < n && k < prefix.size(); ++k)
    tr.window[n - 1 - k] = prefix[prefix.size() - 1 - k];

  // Attention runs over the PAD-compacted source with a virtual <eos>
  // terminator appended, so the end of the source is addressable.
  tr.attended.reserve(source.size() + 1);
  for (int t : source)
    if (t != Vocabulary::kPad) tr.attended.push_back(t);
  if (tr.attended.empty()) throw std::invalid_argument("source contains only <pad> tokens");
  tr.attended.push_back(Vocabulary::kEos);

  // attention query from the most recent token plus its decoder position
  const auto pe = position_code(tr.step, d);
  tr.query_input.resize(d);
  const auto last_embed = m.target_embeddings.row(static_cast<std::size_t>(tr.window[n - 1]));
  for (std::size_t i = 0; i < d; ++i) tr.query_input[i] = last_embed[i] + pe[i];

  tr.query.assign(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    const auto wrow = m.attention_query.row(r);
    for (std::size_t c = 0; c < d; ++c) acc += wrow[c] * tr.query_input[c];
    tr.query[r] = acc;
  }

  // scaled dot-product scores against position-tagged source keys
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> scores(tr.attended.size());
  double max_score = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < tr.attended.size(); ++j) {
    const auto key = position_code(j, d);
    const auto src_embed = m.source_embeddings.row(static_cast<std::size_t>(tr.attended[j]));
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += tr.query[i] * (src_embed[i] + key[i]);
    scores[j] = acc * inv_sqrt_d;
    max_score = std::max(max_score, scores[j]);
  }

  tr.attn_weights.resize(tr.attended.size());
  double weight_sum = 0.0;
  for (std::size_t j = 0; j < tr.attended.size(); ++j) {
    tr.attn_weights[j] = std::exp(scores[j] - max_score);
    weight_sum += tr.attn_weights[j];
  }
  for (double& w : tr.attn_weights) w /= weight_sum;

  // context = [window embeddings ..., attention-weighted mean of source embeddings]
  tr.context.assign((n + 1) * d, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto emb = m.target_embeddings.row(static_cast<std::size_t>(tr.window[k]));
    for (std::size_t i = 0; i < d; ++i) tr.context[k * d + i] = emb[i];
  }
  for (std::size_t j = 0; j < tr.attended.size(); ++j) {
    const auto emb = m.source_embeddings.row(static_cast<std::size_t>(tr.attended[j]));
    for (std::size_t i = 0; i < d; ++i) tr.context[n * d + i] += tr.attn_weights[j] * emb[i];
  }

  tr.hidden.resize(h);
  for (std::size_t r = 0; r < h; ++r) {
    double acc = m.hidden_bias.at(r, 0);
    const auto wrow = m.hidden_weights.row(r);
    for (std::size_t c = 0; c < tr.context.size(); ++c) acc += wrow[c] * tr.context[c];
    tr.hidden[r] = std::tanh(acc);
  }

  tr.logits.resize(V);
  for (std::size_t r = 0; r < V; ++r) {
    double acc = m.output_bias.at(r, 0);
    const auto wrow = m.output_weights.row(r);
    for (std::size_t c = 0; c < h; ++c) acc += wrow[c] * tr.hidden[c];
    tr.logits[r] = acc;
  }
  return tr;
}

// Accumulates parameter gradients for one decoder step given dLoss/dlogits.
inline void backward_trace(const Seq2SeqModel& m, const StepTrace& tr,
                           std::span<const double> g_logits, ParamBlock& grads) {
  const std::size_t V = m.vocab.size(), d = m.dims.embed_dim, h = m.dims.hidden_dim;
  const std::size_t n = m.dims.context_len;

  // output projection
  std::vector<double> g_hidden(h, 0.0);
  for (std::size_t r = 0; r < V; ++r) {
    const double g = g_logits[r];
    if (g == 0.0) continue;
    grads.output_bias.at(r, 0) += g;
    auto grow = grads.output_weights.row(r);
    const auto wrow = m.output_weights.row(r);
    for (std::size_t c = 0; c < h; ++c) {
      grow[c] += g * tr.hidden[c];
      g_hidden[c] += g * wrow[c];
    }
  }

  // tanh hidden layer
  std::vector<double> g_context(tr.context.size(), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const double g_pre = g_hidden[r] * (1.0 - tr.hidden[r] * tr.hidden[r]);
    if (g_pre == 0.0) continue;
    grads.hidden_bias.at(r, 0) += g_pre;
    auto grow = grads.hidden_weights.row(r);
    const auto wrow = m.hidden_weights.row(r);
    for (std::size_t c = 0; c < tr.context.size(); ++c) {
      grow[c] += g_pre * tr.context[c];
      g_context[c] += g_pre * wrow[c];
    }
  }

  // window embeddings
  for (std::size_t k = 0; k < n; ++k) {
    auto grow = grads.target_embeddings.row(static_cast<std::size_t>(tr.window[k]));
    for (std::size_t i = 0; i < d; ++i) grow[i] += g_context[k * d + i];
  }

  // attention: values first, then softmax, then query/key paths
  std::span<const double> g_attn(g_context.data() + n * d, d);
  std::vector<double> g_weights(tr.attended.size(), 0.0);
  double weighted_g = 0.0;
  for (std::size_t j = 0; j < tr.attended.size(); ++j) {
    const auto emb = m.source_embeddings.row(static_cast<std::size_t>(tr.attended[j]));
    auto gemb = grads.source_embeddings.row(static_cast<std::size_t>(tr.attended[j]));
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      gemb[i] += tr.attn_weights[j] * g_attn[i];
      dot += g_attn[i] * emb[i];
    }
    g_weights[j] = dot;
    weighted_g += tr.attn_weights[j] * dot;
  }

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> g_query(d, 0.0);
  for (std::size_t j = 0; j < tr.attended.size(); ++j) {
    const double g_score = tr.attn_weights[j] * (g_weights[j] - weighted_g) * inv_sqrt_d;
    if (g_score == 0.0) continue;
    const auto key = position_code(j, d);
    const auto emb = m.source_embeddings.row(static_cast<std::size_t>(tr.attended[j]));
    auto gemb = grads.source_embeddings.row(static_cast<std::size_t>(tr.attended[j]));
    for (std::size_t i = 0; i < d; ++i) {
      gemb[i] += g_score * tr.query[i];
      g_query[i] += g_score * (emb[i] + key[i]);
    }
  }

  std::vector<double> g_query_input(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    if (g_query[r] == 0.0) continue;
    auto grow = grads.attention_query.row(r);
    const auto wrow = m.attention_query.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      grow[c] += g_query[r] * tr.query_input[c];
      g_query_input[c] += g_query[r] * wrow[c];
    }
  }
  auto glast = grads.target_embeddings.row(static_cast<std::size_t>(tr.window[n - 1]));
  for (std::size_t i = 0; i < d; ++i) glast[i] += g_query_input[i];
}

}  // namespace detail

inline Seq2SeqModel Seq2SeqModel::init(Vocabulary v, ModelDims md, SmoothingSpec sm,
                                       std::uint64_t seed) {
  Seq2SeqModel m(std::move(v), md, std::move(sm));
  Rng rng(Rng::derive(seed, 0));
  m.for_each_parameter([&](const char*, Matrix& p) {
    for (double& x : p.data) x = rng.uniform(-0.1, 0.1);
  });
  return m;
}

// Scores for the next target token given the source and the gold or generated
// prefix. Deterministic: identical inputs give bitwise-identical outputs.
inline LogitVector forward_step(const Seq2SeqModel& m, std::span<const int> source,
                                std::span<const int> prefix) {
  return detail::forward_trace(m, source, prefix).logits;
}

inline SimplexDistribution Seq2SeqModel::step_distribution(std::span<const int> source,
                                                           std::span<const int> prefix) const {
  return transform(forward_step(*this, source, prefix), smoothing.alpha);
}

// Chain-rule log-probability of the full target. Returns -infinity when any
// step assigns the gold token probability exactly 0 (possible for alpha > 1).
inline double sequence_log_prob(const Seq2SeqModel& m, const SequencePair& pair) {
  validate_pair(pair);
  double total = 0.0;
  for (std::size_t i = 0; i < pair.target.size(); ++i) {
    const auto dist = m.step_distribution(
        pair.source, std::span<const int>(pair.target.data(), i));
    const double p = dist.probabilities[static_cast<std::size_t>(pair.target[i])];
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(p);
  }
  return total;
}

// Per-gold-step output distributions with the gold prefix fed at every step.
inline std::vector<SimplexDistribution> forced_decode(const Seq2SeqModel& m,
                                                      const SequencePair& pair) {
  validate_pair(pair);
  std::vector<SimplexDistribution> out;
  out.reserve(pair.target.size());
  for (std::size_t i = 0; i < pair.target.size(); ++i)
    out.push_back(m.step_distribution(pair.source,
                                      std::span<const int>(pair.target.data(), i)));
  return out;
}

// Mean per-token smoothed loss over the batch and gradients for every
// parameter. Examples are processed in order so accumulation is deterministic.
inline double batch_loss_and_gradients(const Seq2SeqModel& m,
                                       std::span<const SequencePair> batch,
                                       ParamBlock& grads) {
  if (batch.empty()) throw EmptyDataset("batch must be nonempty");
  std::size_t total_tokens = 0;
  for (const auto& pair : batch) total_tokens += pair.target.size();
  const double inv_tokens = 1.0 / static_cast<double>(total_tokens);

  double total_loss = 0.0;
  std::vector<double> g_logits(m.vocab.size());
  for (const auto& pair : batch) {
    validate_pair(pair);
    for (std::size_t i = 0; i < pair.target.size(); ++i) {
      const auto tr = detail::forward_trace(
          m, pair.source, std::span<const int>(pair.target.data(), i));
      const auto loss = smoothed_loss(tr.logits,
                                      static_cast<std::size_t>(pair.target[i]), m.smoothing);
      total_loss += loss.value * inv_tokens;
      for (std::size_t y = 0; y < g_logits.size(); ++y)
        g_logits[y] = loss.gradient[y] * inv_tokens;
      detail::backward_trace(m, tr, g_logits, grads);
    }
  }
  return total_loss;
}

// Adam moment buffers and step counter.
struct AdamState {
  ParamBlock m, v;
  std::uint64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps_hat = 1e-8;

  static AdamState init(const Seq2SeqModel& model) {
    AdamState s;
    s.m = ParamBlock::zeros_like(model);
    s.v = ParamBlock::zeros_like(model);
    return s;
  }
};

// One bias-corrected Adam update.
inline void adam_step(AdamState& state, Seq2SeqModel& model, ParamBlock& grads, double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  Matrix* moments1[] = {&state.m.source_embeddings, &state.m.target_embeddings,
                        &state.m.attention_query,   &state.m.hidden_weights,
                        &state.m.hidden_bias,       &state.m.output_weights,
                        &state.m.output_bias};
  Matrix* moments2[] = {&state.v.source_embeddings, &state.v.target_embeddings,
                        &state.v.attention_query,   &state.v.hidden_weights,
                        &state.v.hidden_bias,       &state.v.output_weights,
                        &state.v.output_bias};
  Matrix* params[] = {&model.source_embeddings, &model.target_embeddings,
                      &model.attention_query,   &model.hidden_weights,
                      &model.hidden_bias,       &model.output_weights,
                      &model.output_bias};
  Matrix* gs[] = {&grads.source_embeddings, &grads.target_embeddings,
                  &grads.attention_query,   &grads.hidden_weights,
                  &grads.hidden_bias,       &grads.output_weights,
                  &grads.output_bias};

  for (int k = 0; k < 7; ++k) {
    auto& p = params[k]->data;
    auto& g = gs[k]->data;
    auto& m1 = moments1[k]->data;
    auto& m2 = moments2[k]->data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m1[i] = state.beta1 * m1[i] + (1.0 - state.beta1) * g[i];
      m2[i] = state.beta2 * m2[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m1[i] / bc1;
      const double vhat = m2[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps_hat);
    }
  }
}

}  // namespace fyseq
