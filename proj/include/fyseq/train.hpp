#pragma once

// Training loop: shuffled minibatches, Adam, per-epoch dev decoding, early
// stopping on mean dev Levenshtein distance keeping the best checkpoint
// (ties keep the earlier epoch). Fully deterministic given the seed.

#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "fyseq/decoding.hpp"
#include "fyseq/metrics.hpp"
#include "fyseq/model.hpp"
#include "fyseq/rng.hpp"

namespace fyseq {

struct TrainConfig {
  int max_epochs = 30;
  int patience = 10;
  double learning_rate = 0.005;
  int batch_size = 16;
  std::uint64_t seed = 1;
  int beam_width = 5;  // dev decoding during early stopping
  int max_len = 0;     // 0 = 2 * source length + 8
};

struct EpochStats {
  int epoch = 0;           // 1-based
  double train_loss = 0.0; // mean per-token smoothed loss
  double dev_wer = 0.0;
  double dev_per = 0.0;
  double dev_lev = 0.0;    // mean Levenshtein distance per dev example
};

struct TrainResult {
  Seq2SeqModel model;  // best checkpoint
  std::vector<EpochStats> log;
  int best_epoch = 0;
  double best_dev_lev = 0.0;
};

struct DevEval {
  double wer = 0.0, per = 0.0, mean_lev = 0.0;
};

// Beam-decode every dev example and score against the references (EOS
// stripped on both sides).
inline DevEval evaluate_dev(const Seq2SeqModel& model, std::span<const SequencePair> dev,
                            int beam_width, int max_len) {
  std::vector<std::vector<int>> hyps, refs;
  hyps.reserve(dev.size());
  refs.reserve(dev.size());
  double lev_sum = 0.0;
  for (const auto& pair : dev) {
    const int len = max_len > 0 ? max_len : default_max_len(pair.source.size());
    const auto search = beam_search(model, pair.source, beam_width, len);
    std::vector<int> hyp = search.hypotheses.front().tokens;
    if (!hyp.empty() && hyp.back() == Vocabulary::kEos) hyp.pop_back();
    std::vector<int> ref(pair.target.begin(), pair.target.end() - 1);
    lev_sum += static_cast<double>(levenshtein(hyp, ref));
    hyps.push_back(std::move(hyp));
    refs.push_back(std::move(ref));
  }
  DevEval eval;
  eval.wer = wer(hyps, refs);
  eval.per = per(hyps, refs);
  eval.mean_lev = lev_sum / static_cast<double>(dev.size());
  return eval;
}

inline TrainResult train(Seq2SeqModel model, std::span<const SequencePair> train_set,
                         std::span<const SequencePair> dev_set, const TrainConfig& config) {
  if (train_set.empty()) throw EmptyDataset("training set is empty");
  if (dev_set.empty()) throw EmptyDataset("dev set is empty");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (config.max_epochs < 1) throw std::invalid_argument("max epochs must be >= 1");

  Rng shuffle_rng(Rng::derive(config.seed, 1));
  AdamState adam = AdamState::init(model);

  TrainResult result{model, {}, 0, std::numeric_limits<double>::infinity()};
  int since_improvement = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t token_total = 0;
    std::vector<SequencePair> batch;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      batch.clear();
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::size_t batch_tokens = 0;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_set[order[i]]);
        batch_tokens += batch.back().target.size();
      }
      ParamBlock grads = ParamBlock::zeros_like(model);
      const double batch_loss = batch_loss_and_gradients(model, batch, grads);
      adam_step(adam, model, grads, config.learning_rate);
      loss_sum += batch_loss * static_cast<double>(batch_tokens);
      token_total += batch_tokens;
    }

    const DevEval dev = evaluate_dev(model, dev_set, config.beam_width, config.max_len);
    result.log.push_back({epoch, loss_sum / static_cast<double>(token_total), dev.wer,
                          dev.per, dev.mean_lev});

    if (dev.mean_lev < result.best_dev_lev) {
      result.best_dev_lev = dev.mean_lev;
      result.best_epoch = epoch;
      result.model = model;
      since_improvement = 0;
    } else {
      ++since_improvement;
      if (since_improvement > config.patience) break;
    }
  }
  return result;
}

}  // namespace fyseq
