#pragma once

// Task metrics: Levenshtein distance, word and phoneme error rates, forced-
// decoding support density, and expected calibration error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "fyseq/decoding.hpp"
#include "fyseq/errors.hpp"
#include "fyseq/model.hpp"

namespace fyseq {

// Unit-cost edit distance (insert / delete / substitute).
template <typename T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> row(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[m];
}

inline std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  return levenshtein(std::span<const int>(a), std::span<const int>(b));
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(std::span<const char>(a.data(), a.size()),
                     std::span<const char>(b.data(), b.size()));
}

// Percentage of hypotheses that do not exactly match their reference.
inline double wer(std::span<const std::vector<int>> hypotheses,
                  std::span<const std::vector<int>> references) {
  if (hypotheses.size() != references.size())
    throw LengthMismatch("hypothesis and reference counts differ");
  if (hypotheses.empty()) throw LengthMismatch("wer needs at least one pair");
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    if (hypotheses[i] != references[i]) ++mismatched;
  return 100.0 * static_cast<double>(mismatched) / static_cast<double>(hypotheses.size());
}

// Total Levenshtein distance over total reference length, as a percentage.
inline double per(std::span<const std::vector<int>> hypotheses,
                  std::span<const std::vector<int>> references) {
  if (hypotheses.size() != references.size())
    throw LengthMismatch("hypothesis and reference counts differ");
  std::size_t distance = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    distance += levenshtein(hypotheses[i], references[i]);
    ref_len += references[i].size();
  }
  if (ref_len == 0) throw EmptyReferences("references have zero total length");
  return 100.0 * static_cast<double>(distance) / static_cast<double>(ref_len);
}

// Forced-decoding support sizes, macro-averaged over steps.
struct DensityReport {
  double mean_percent = 0.0;
  std::vector<std::vector<std::size_t>> per_example_support_sizes;
};

template <StepModel M>
DensityReport support_density(const M& model, std::span<const SequencePair> dataset) {
  if (dataset.empty()) throw EmptyDataset("support density needs a nonempty dataset");
  DensityReport report;
  const double denom = static_cast<double>(model.vocab_size());
  double percent_sum = 0.0;
  std::size_t steps = 0;
  for (const auto& pair : dataset) {
    std::vector<std::size_t> sizes;
    sizes.reserve(pair.target.size());
    for (std::size_t i = 0; i < pair.target.size(); ++i) {
      const auto dist = model.step_distribution(
          pair.source, std::span<const int>(pair.target.data(), i));
      sizes.push_back(dist.support.size());
      percent_sum += 100.0 * static_cast<double>(dist.support.size()) / denom;
      ++steps;
    }
    report.per_example_support_sizes.push_back(std::move(sizes));
  }
  report.mean_percent = percent_sum / static_cast<double>(steps);
  return report;
}

// Reliability bins over force-decoded predictions: bin m covers
// ((m-1)/M, m/M], confidence 0 lands in the first bin, 1 in the last.
struct CalibrationReport {
  std::size_t bin_count = 0;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> correct;
  std::vector<double> mean_confidence;  // 0 for empty bins
  std::vector<double> accuracy;         // 0 for empty bins
  double ece = 0.0;
};

inline double recompute_ece(const CalibrationReport& report) {
  std::size_t total = 0;
  for (std::size_t c : report.counts) total += c;
  double ece = 0.0;
  for (std::size_t b = 0; b < report.bin_count; ++b) {
    if (report.counts[b] == 0) continue;
    const double weight = static_cast<double>(report.counts[b]) / static_cast<double>(total);
    ece += weight * std::abs(report.accuracy[b] - report.mean_confidence[b]);
  }
  return ece;
}

template <StepModel M>
CalibrationReport expected_calibration_error(const M& model,
                                             std::span<const SequencePair> dataset,
                                             std::size_t bins = 10) {
  if (bins < 1) throw std::invalid_argument("ece needs at least one bin");
  if (dataset.empty()) throw EmptyDataset("ece needs a nonempty dataset");

  CalibrationReport report;
  report.bin_count = bins;
  report.counts.assign(bins, 0);
  report.correct.assign(bins, 0);
  std::vector<double> confidence_sum(bins, 0.0);

  for (const auto& pair : dataset) {
    for (std::size_t i = 0; i < pair.target.size(); ++i) {
      const auto dist = model.step_distribution(
          pair.source, std::span<const int>(pair.target.data(), i));
      // argmax ties resolve to the lowest index
      std::size_t arg = 0;
      for (std::size_t y = 1; y < dist.probabilities.size(); ++y)
        if (dist.probabilities[y] > dist.probabilities[arg]) arg = y;
      const double conf = dist.probabilities[arg];
      std::size_t bin;
      if (conf <= 0.0) {
        bin = 0;
      } else {
        bin = static_cast<std::size_t>(
            std::ceil(conf * static_cast<double>(bins))) - 1;
        bin = std::min(bin, bins - 1);
      }
      report.counts[bin] += 1;
      confidence_sum[bin] += conf;
      if (arg == static_cast<std::size_t>(pair.target[i])) report.correct[bin] += 1;
    }
  }

  report.mean_confidence.assign(bins, 0.0);
  report.accuracy.assign(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    if (report.counts[b] == 0) continue;
    report.mean_confidence[b] = confidence_sum[b] / static_cast<double>(report.counts[b]);
    report.accuracy[b] =
        static_cast<double>(report.correct[b]) / static_cast<double>(report.counts[b]);
  }
  report.ece = recompute_ece(report);
  return report;
}

}  // namespace fyseq
