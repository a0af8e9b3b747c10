#pragma once

// The entmax family: transformations from score vectors to sparse probability
// distributions over a finite vocabulary. alpha = 1 is softmax, alpha = 2 is
// sparsemax, alpha = 1.5 has a fast exact algorithm; any alpha >= 1 is
// supported through bisection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fyseq/errors.hpp"

namespace fyseq {

using LogitVector = std::vector<double>;

// Entmax exponent parameter. alpha = 1 selects softmax semantics, alpha > 1
// permits sparsity. Values below 1 are rejected here, once, so the transforms
// never have to re-check.
class Alpha {
 public:
  explicit Alpha(double value) : value_(value) {
    if (!std::isfinite(value) || value < 1.0)
      throw std::invalid_argument("alpha must be finite and >= 1, got " + std::to_string(value));
  }
  double value() const { return value_; }
  bool operator==(const Alpha&) const = default;

 private:
  double value_;
};

// A point on the probability simplex with its sparsity pattern made explicit.
// `threshold` is the normalizing constant tau such that
// probabilities[y] == exp_{2-alpha}(z_y - tau); for alpha = 1 it is the
// log-partition of the input scores.
struct SimplexDistribution {
  std::vector<double> probabilities;
  std::vector<std::int32_t> support;  // ascending indices with probability > 0
  double threshold = 0.0;

  std::size_t size() const { return probabilities.size(); }
};

namespace detail {

inline void check_logits(const LogitVector& z) {
  if (z.empty()) throw std::invalid_argument("logit vector must be nonempty");
  for (double v : z)
    if (!std::isfinite(v)) throw std::invalid_argument("logit vector contains a non-finite entry");
}

inline SimplexDistribution finish(std::vector<double> probs, double tau) {
  SimplexDistribution d;
  d.support.reserve(probs.size());
  for (std::size_t y = 0; y < probs.size(); ++y)
    if (probs[y] > 0.0) d.support.push_back(static_cast<std::int32_t>(y));
  d.probabilities = std::move(probs);
  d.threshold = tau;
  return d;
}

// Indices of z sorted by descending value; stable so ties keep input order.
inline std::vector<std::size_t> descending_order(const LogitVector& z) {
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  return order;
}

}  // namespace detail

// Tsallis beta-exponential: [1 + (1-beta)v]_+^{1/(1-beta)} with exp(v) at
// beta = 1. Continuous in beta; the clamp handles negative bases.
inline double beta_exp(double v, double beta) {
  if (beta == 1.0) return std::exp(v);
  const double one_minus_beta = 1.0 - beta;
  const double base = 1.0 + one_minus_beta * v;
  if (base <= 0.0) {
    // beta < 1: positive exponent, clamped base gives 0.
    // beta > 1: negative exponent, the function diverges at the boundary.
    return beta < 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  // log1p keeps the beta -> 1 limit accurate.
  return std::exp(std::log1p(one_minus_beta * v) / one_minus_beta);
}

// Softmax with max-subtraction stabilization. Full support by construction;
// threshold holds log-sum-exp of the inputs.
inline SimplexDistribution softmax(const LogitVector& z) {
  detail::check_logits(z);
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t y = 0; y < z.size(); ++y) {
    p[y] = std::exp(z[y] - m);
    sum += p[y];
  }
  for (double& v : p) v /= sum;
  return detail::finish(std::move(p), m + std::log(sum));
}

// Exact sparsemax (alpha = 2): Euclidean projection onto the simplex via the
// descending-sort support rule.
inline SimplexDistribution sparsemax(const LogitVector& z) {
  detail::check_logits(z);
  const double m = *std::max_element(z.begin(), z.end());
  const auto order = detail::descending_order(z);

  double cumsum = 0.0;
  double tau = 0.0;  // threshold in p_y = [z_y - m - tau]_+
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double zk = z[order[k]] - m;
    cumsum += zk;
    const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (zk > candidate) tau = candidate;
  }

  std::vector<double> p(z.size());
  for (std::size_t y = 0; y < z.size(); ++y) p[y] = std::max(z[y] - m - tau, 0.0);
  // Eq.-4 convention: p_y = [1 + (z_y - tau_4)]_+  =>  tau_4 = tau + m + 1.
  return detail::finish(std::move(p), tau + m + 1.0);
}

// Exact 1.5-entmax via the square-root parameterization: on s = z/2 the
// distribution is p_y = [s_y - tau]_+^2 with tau found in closed form from
// cumulative moments of the sorted scores.
inline SimplexDistribution entmax15(const LogitVector& z) {
  detail::check_logits(z);
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> s(z.size());
  for (std::size_t y = 0; y < z.size(); ++y) s[y] = (z[y] - m) / 2.0;
  const auto order = detail::descending_order(s);

  double cum = 0.0, cum_sq = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double sk = s[order[k]];
    cum += sk;
    cum_sq += sk * sk;
    const double kk = static_cast<double>(k + 1);
    const double mean = cum / kk;
    const double scatter = cum_sq - cum * mean;  // k * variance
    const double delta = (1.0 - scatter) / kk;
    const double candidate = mean - std::sqrt(std::max(delta, 0.0));
    if (candidate <= sk) tau = candidate;
  }

  std::vector<double> p(z.size());
  for (std::size_t y = 0; y < z.size(); ++y) {
    const double t = std::max(s[y] - tau, 0.0);
    p[y] = t * t;
  }
  // p_y = [1 + 0.5 (z_y - tau_4)]_+^2  =>  tau_4 = 2 tau + m + 2.
  return detail::finish(std::move(p), 2.0 * tau + m + 2.0);
}

// General alpha >= 1 by bisection on the normalization residual. The bracket
// endpoints come from the one-hot and uniform extremes; the final
// probabilities are renormalized by the achieved sum so they add to 1 exactly
// up to rounding. Entries whose clamped base is zero stay exactly zero.
inline SimplexDistribution entmax_bisect(const LogitVector& z, Alpha alpha,
                                         double tol = 1e-12, int max_iter = 100) {
  detail::check_logits(z);
  if (tol <= 0.0) throw std::invalid_argument("tol must be positive");
  if (alpha.value() == 1.0) return softmax(z);

  const double a = alpha.value();
  const double am1 = a - 1.0;
  const double inv_am1 = 1.0 / am1;
  const double m = *std::max_element(z.begin(), z.end());
  const std::size_t n = z.size();

  // Work on x = (alpha-1) (z - max z), so max x = 0, and solve for t in
  // p_y = [x_y - t]_+^{1/(alpha-1)}.
  std::vector<double> x(n);
  for (std::size_t y = 0; y < n; ++y) x[y] = am1 * (z[y] - m);

  auto mass = [&](double t, std::vector<double>* out) {
    double sum = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      const double base = x[y] - t;
      const double p = base > 0.0 ? std::pow(base, inv_am1) : 0.0;
      if (out) (*out)[y] = p;
      sum += p;
    }
    return sum;
  };

  double lo = -1.0;                                            // sum >= 1 here
  double hi = -std::pow(1.0 / static_cast<double>(n), am1);    // sum <= 1 here
  double t = 0.5 * (lo + hi);
  double residual = mass(t, nullptr) - 1.0;
  int iter = 0;
  bool bracket_exhausted = false;
  while (std::abs(residual) > tol && iter < max_iter) {
    if (residual > 0.0)
      lo = t;
    else
      hi = t;
    t = 0.5 * (lo + hi);
    residual = mass(t, nullptr) - 1.0;
    ++iter;
    // Once the bracket narrows to double resolution the residual cannot
    // improve further; the threshold is as accurate as it can get.
    if (hi - lo <= std::numeric_limits<double>::epsilon() *
                       std::max({std::abs(lo), std::abs(hi), 1.0})) {
      bracket_exhausted = true;
      break;
    }
  }
  if (std::abs(residual) > tol && !bracket_exhausted)
    throw IterationLimitExceeded("entmax bisection residual " + std::to_string(residual) +
                                 " after " + std::to_string(max_iter) + " iterations");

  std::vector<double> p(n);
  const double sum = mass(t, &p);
  for (double& v : p) v /= sum;
  // p_y = [1 + (alpha-1)(z_y - tau_4)]_+^{1/(alpha-1)}  =>  tau_4 = (1+t)/(alpha-1) + m.
  return detail::finish(std::move(p), (1.0 + t) * inv_am1 + m);
}

// Dispatcher: routes to the exact algorithm where one exists.
inline SimplexDistribution transform(const LogitVector& z, Alpha alpha) {
  const double a = alpha.value();
  if (a == 1.0) return softmax(z);
  if (a == 1.5) return entmax15(z);
  if (a == 2.0) return sparsemax(z);
  return entmax_bisect(z, alpha);
}

}  // namespace fyseq
