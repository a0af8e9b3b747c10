#pragma once

// Search over locally normalized sequence models: width-limited beam search
// and exhaustive best-first search over the nonzero-probability hypothesis
// tree. Anything with a vocabulary, an EOS index and a per-step distribution
// can be decoded; hand-built table models and the trained model share the
// same engine.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "fyseq/entmax.hpp"
#include "fyseq/vocab.hpp"

namespace fyseq {

template <typename M>
concept StepModel = requires(const M& m, std::span<const int> src, std::span<const int> prefix) {
  { m.vocab_size() } -> std::convertible_to<std::size_t>;
  { m.eos_index() } -> std::convertible_to<int>;
  { m.step_distribution(src, prefix) } -> std::same_as<SimplexDistribution>;
};

// A target-token sequence with its accumulated log-probability. Complete once
// it ends with EOS; complete hypotheses are never extended.
struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  bool complete = false;
};

struct SearchResult {
  std::vector<Hypothesis> hypotheses;  // complete ones sorted by log_prob desc
  double covered_mass = 0.0;           // probability mass of collected complete hypotheses
  bool truncated = false;
};

inline int default_max_len(std::size_t source_len) {
  return static_cast<int>(2 * source_len + 8);
}

namespace detail {

// Equal log-probabilities break ties by lexicographic token order.
inline bool better_hypothesis(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

}  // namespace detail

// Standard length-unnormalized beam search. Live hypotheses expand over
// nonzero-probability tokens only; the top `beam_width` candidates by total
// log-probability survive, completed ones retiring into the result. Stops
// when the beam is empty or max_len is reached. If nothing completed, the
// best open prefix is returned with `truncated` set. `length_normalize`
// ranks candidates by log-probability per token instead (off by default).
template <StepModel M>
SearchResult beam_search(const M& model, std::span<const int> source, int beam_width,
                         int max_len, bool length_normalize = false) {
  if (beam_width < 1) throw std::invalid_argument("beam width must be >= 1");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");

  const int eos = model.eos_index();
  auto rank_score = [&](const Hypothesis& h) {
    return length_normalize && !h.tokens.empty()
               ? h.log_prob / static_cast<double>(h.tokens.size())
               : h.log_prob;
  };
  auto better = [&](const Hypothesis& a, const Hypothesis& b) {
    const double sa = rank_score(a), sb = rank_score(b);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  };

  SearchResult result;
  std::vector<Hypothesis> live(1);
  Hypothesis best_open = live.front();

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& h : live) {
      const auto dist = model.step_distribution(
          source, std::span<const int>(h.tokens.data(), h.tokens.size()));
      for (std::int32_t y : dist.support) {
        Hypothesis child;
        child.tokens = h.tokens;
        child.tokens.push_back(y);
        child.log_prob = h.log_prob + std::log(dist.probabilities[static_cast<std::size_t>(y)]);
        child.complete = (y == eos);
        candidates.push_back(std::move(child));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    if (candidates.size() > static_cast<std::size_t>(beam_width))
      candidates.resize(static_cast<std::size_t>(beam_width));

    live.clear();
    for (Hypothesis& c : candidates) {
      if (c.complete) {
        result.covered_mass += std::exp(c.log_prob);
        result.hypotheses.push_back(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
    }
    if (!live.empty() && detail::better_hypothesis(live.front(), best_open))
      best_open = live.front();
  }

  std::sort(result.hypotheses.begin(), result.hypotheses.end(), detail::better_hypothesis);
  if (result.hypotheses.empty()) {
    result.truncated = true;
    result.hypotheses.push_back(std::move(best_open));
  }
  return result;
}

// Exhaustive best-first search over nonzero-support continuations. Nothing is
// pruned except zero-probability branches and prefixes that cannot complete
// within max_len; terminates once the collected complete mass reaches
// 1 - mass_floor, the frontier is exhausted, or the node budget is hit
// (reported via `truncated`). Expected to exceed any practical budget for
// softmax models, whose hypothesis tree is |V|-ary.
template <StepModel M>
SearchResult exact_search(const M& model, std::span<const int> source, int max_len,
                          double mass_floor, std::uint64_t node_budget = 1000000) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (!(mass_floor >= 0.0 && mass_floor < 1.0))
    throw std::invalid_argument("mass_floor must lie in [0, 1)");

  const int eos = model.eos_index();
  auto worse = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob < b.log_prob;
    return a.tokens > b.tokens;
  };
  std::priority_queue<Hypothesis, std::vector<Hypothesis>, decltype(worse)> frontier(worse);
  frontier.push(Hypothesis{});

  SearchResult result;
  std::uint64_t expansions = 0;
  const double mass_target = 1.0 - mass_floor;

  while (!frontier.empty() && result.covered_mass < mass_target) {
    if (expansions >= node_budget) {
      result.truncated = true;
      break;
    }
    const Hypothesis h = frontier.top();
    frontier.pop();
    ++expansions;

    const auto dist = model.step_distribution(
        source, std::span<const int>(h.tokens.data(), h.tokens.size()));
    for (std::int32_t y : dist.support) {
      Hypothesis child;
      child.tokens = h.tokens;
      child.tokens.push_back(y);
      child.log_prob = h.log_prob + std::log(dist.probabilities[static_cast<std::size_t>(y)]);
      if (y == eos) {
        child.complete = true;
        result.covered_mass += std::exp(child.log_prob);
        result.hypotheses.push_back(std::move(child));
      } else if (static_cast<int>(child.tokens.size()) < max_len) {
        frontier.push(std::move(child));
      }
      // over-length open prefixes are dead ends; their mass is simply not covered
    }
  }

  std::sort(result.hypotheses.begin(), result.hypotheses.end(), detail::better_hypothesis);
  return result;
}

// log p(EOS | source, BOS-only prefix); exactly -infinity when the first-step
// EOS probability is 0.
template <StepModel M>
double empty_string_log_prob(const M& model, std::span<const int> source) {
  const auto dist = model.step_distribution(source, std::span<const int>());
  const double p = dist.probabilities[static_cast<std::size_t>(model.eos_index())];
  return p == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(p);
}

// Percentage of examples whose empty string outscores the beam hypothesis.
// -infinity empty-string scores never count as greater.
template <StepModel M>
double cat_got_tongue_rate(const M& model, std::span<const SequencePair> dataset,
                           int beam_width, int max_len = 0) {
  if (dataset.empty()) throw EmptyDataset("cat-got-tongue audit needs a nonempty dataset");
  std::size_t offenders = 0;
  for (const auto& pair : dataset) {
    const int len = max_len > 0 ? max_len : default_max_len(pair.source.size());
    const auto beam = beam_search(model, pair.source, beam_width, len);
    const double empty = empty_string_log_prob(model, pair.source);
    if (empty > beam.hypotheses.front().log_prob) ++offenders;
  }
  return 100.0 * static_cast<double>(offenders) / static_cast<double>(dataset.size());
}

}  // namespace fyseq
