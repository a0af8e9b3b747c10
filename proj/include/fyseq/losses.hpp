#pragma once

// Tsallis negentropies and Fenchel-Young losses, including label smoothing
// generalized to the whole family: the smoothed loss is the plain loss
// evaluated at the mixed target (1-eps) e_gold + eps r, and two equivalent
// reformulations (linear regularizer, uniform-loss regularizer) are provided
// so the identities between them can be checked numerically.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fyseq/entmax.hpp"
#include "fyseq/errors.hpp"

namespace fyseq {

// A fixed point on the simplex used as a training target or smoothing
// distribution.
struct TargetDistribution {
  enum class Kind { OneHot, Uniform, General };

  std::vector<double> probabilities;
  Kind kind = Kind::General;

  static TargetDistribution one_hot(std::size_t size, std::size_t index) {
    if (index >= size) throw std::invalid_argument("one-hot index out of range");
    TargetDistribution q;
    q.probabilities.assign(size, 0.0);
    q.probabilities[index] = 1.0;
    q.kind = Kind::OneHot;
    return q;
  }

  static TargetDistribution uniform(std::size_t size) {
    if (size == 0) throw std::invalid_argument("uniform distribution needs size >= 1");
    TargetDistribution q;
    q.probabilities.assign(size, 1.0 / static_cast<double>(size));
    q.kind = Kind::Uniform;
    return q;
  }

  static TargetDistribution general(std::vector<double> probs) {
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("target probabilities must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("target probabilities must sum to 1, got " + std::to_string(sum));
    TargetDistribution q;
    q.probabilities = std::move(probs);
    q.kind = Kind::General;
    return q;
  }

  std::size_t size() const { return probabilities.size(); }
};

// alpha, epsilon and the smoothing distribution r. An unset r means uniform
// over whatever vocabulary the loss is evaluated on.
struct SmoothingSpec {
  Alpha alpha;
  double epsilon = 0.0;
  std::optional<TargetDistribution> smoothing_distribution;

  SmoothingSpec(Alpha a, double eps,
                std::optional<TargetDistribution> r = std::nullopt)
      : alpha(a), epsilon(eps), smoothing_distribution(std::move(r)) {
    if (!(eps >= 0.0 && eps <= 1.0))
      throw std::invalid_argument("epsilon must lie in [0, 1], got " + std::to_string(eps));
  }

  TargetDistribution resolved_r(std::size_t size) const {
    if (!smoothing_distribution) return TargetDistribution::uniform(size);
    if (smoothing_distribution->size() != size)
      throw std::invalid_argument("smoothing distribution length does not match vocabulary size");
    return *smoothing_distribution;
  }
};

struct LossResult {
  double value = 0.0;
  std::vector<double> gradient;
};

// lambda = eps / (1 - eps), the regularization weight in the uniform-loss
// reformulation.
inline double smoothing_lambda(const SmoothingSpec& spec) {
  if (spec.epsilon == 1.0)
    throw DegenerateEpsilon("lambda = eps/(1-eps) diverges at eps = 1");
  return spec.epsilon / (1.0 - spec.epsilon);
}

// Negative Tsallis entropy. Shannon branch at alpha = 1 with 0 log 0 := 0.
// Zero exactly at one-hot points, minimal at the uniform distribution.
inline double tsallis_negentropy(std::span<const double> p, Alpha alpha) {
  const double a = alpha.value();
  if (a == 1.0) {
    double acc = 0.0;
    for (double v : p)
      if (v > 0.0) acc += v * std::log(v);
    return acc;
  }
  double sum_pow = 0.0;
  for (double v : p) sum_pow += std::pow(v, a);
  return (sum_pow - 1.0) / (a * (a - 1.0));
}

inline double tsallis_negentropy(const SimplexDistribution& p, Alpha alpha) {
  return tsallis_negentropy(std::span<const double>(p.probabilities), alpha);
}

inline double tsallis_negentropy(const TargetDistribution& p, Alpha alpha) {
  return tsallis_negentropy(std::span<const double>(p.probabilities), alpha);
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace detail

// Convex conjugate of the Tsallis negentropy over the simplex,
// Omega*(z) = z . p* - Omega(p*) with p* = transform(z, alpha).
// Equals log-sum-exp at alpha = 1.
inline double conjugate(const LogitVector& z, Alpha alpha) {
  const SimplexDistribution p = transform(z, alpha);
  return detail::dot(z, p.probabilities) - tsallis_negentropy(p, alpha);
}

// Fenchel-Young loss and its gradient in one evaluation:
//   value    = Omega*(z) + Omega(q) - z . q      (>= 0)
//   gradient = transform(z, alpha) - q
inline LossResult fy_loss(const LogitVector& z, const TargetDistribution& q, Alpha alpha) {
  if (z.size() != q.size())
    throw std::invalid_argument("logits and target distribution must have the same length");
  const SimplexDistribution p = transform(z, alpha);
  LossResult out;
  out.value = detail::dot(z, p.probabilities) - tsallis_negentropy(p, alpha) +
              tsallis_negentropy(q, alpha) - detail::dot(z, q.probabilities);
  out.gradient.resize(z.size());
  for (std::size_t y = 0; y < z.size(); ++y)
    out.gradient[y] = p.probabilities[y] - q.probabilities[y];
  return out;
}

namespace detail {

inline TargetDistribution mixed_target(std::size_t size, std::size_t gold,
                                       const SmoothingSpec& spec) {
  const TargetDistribution r = spec.resolved_r(size);
  std::vector<double> mix(size);
  for (std::size_t y = 0; y < size; ++y) mix[y] = spec.epsilon * r.probabilities[y];
  mix[gold] += 1.0 - spec.epsilon;
  return TargetDistribution::general(std::move(mix));
}

}  // namespace detail

// Fenchel-Young label smoothing: the plain loss evaluated at the mixed target
// (1-eps) e_gold + eps r. Gradient = transform(z, alpha) - mixed target.
inline LossResult smoothed_loss(const LogitVector& z, std::size_t gold,
                                const SmoothingSpec& spec) {
  if (gold >= z.size()) throw std::invalid_argument("gold index out of range");
  return fy_loss(z, detail::mixed_target(z.size(), gold, spec), spec.alpha);
}

// Linear-regularizer route to the same value:
//   L(z, e_gold) + eps (z_gold - mean z) + C,
//   C = -Omega(e_gold) + Omega((1-eps) e_gold + eps u).
// C is kept exact so the two routes compare equal, not merely equal up to a
// constant. Requires a uniform smoothing distribution.
inline double smoothed_loss_via_identity(const LogitVector& z, std::size_t gold,
                                         const SmoothingSpec& spec) {
  if (gold >= z.size()) throw std::invalid_argument("gold index out of range");
  if (spec.smoothing_distribution &&
      spec.smoothing_distribution->kind != TargetDistribution::Kind::Uniform)
    throw std::invalid_argument("identity form requires a uniform smoothing distribution");

  const TargetDistribution e_gold = TargetDistribution::one_hot(z.size(), gold);
  const double base = fy_loss(z, e_gold, spec.alpha).value;

  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());

  const double constant = -tsallis_negentropy(e_gold, spec.alpha) +
                          tsallis_negentropy(detail::mixed_target(z.size(), gold, spec), spec.alpha);
  return base + spec.epsilon * (z[gold] - mean) + constant;
}

// Uniform-regularizer route: L(z, e_gold) + lambda L(z, u) with
// lambda = eps/(1-eps). Proportional to the smoothed loss: scaling by (1-eps)
// and subtracting the Bregman information recovers it exactly.
inline double uniform_regularizer_form(const LogitVector& z, std::size_t gold,
                                       const SmoothingSpec& spec) {
  if (gold >= z.size()) throw std::invalid_argument("gold index out of range");
  if (spec.smoothing_distribution &&
      spec.smoothing_distribution->kind != TargetDistribution::Kind::Uniform)
    throw std::invalid_argument("regularizer form requires a uniform smoothing distribution");
  const double lambda = smoothing_lambda(spec);  // throws DegenerateEpsilon at eps = 1

  const double base = fy_loss(z, TargetDistribution::one_hot(z.size(), gold), spec.alpha).value;
  if (lambda == 0.0) return base;
  const double towards_uniform = fy_loss(z, TargetDistribution::uniform(z.size()), spec.alpha).value;
  return base + lambda * towards_uniform;
}

// Bregman information of the eps-mixture of q and r induced by the Tsallis
// negentropy: -Omega((1-eps) q + eps r) + (1-eps) Omega(q) + eps Omega(r).
// Nonnegative by convexity; the constant tying the regularized forms to the
// smoothed loss.
inline double bregman_information(const TargetDistribution& q, const TargetDistribution& r,
                                  double epsilon, Alpha alpha) {
  if (q.size() != r.size())
    throw std::invalid_argument("distributions must have the same length");
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  std::vector<double> mix(q.size());
  for (std::size_t y = 0; y < q.size(); ++y)
    mix[y] = (1.0 - epsilon) * q.probabilities[y] + epsilon * r.probabilities[y];
  return -tsallis_negentropy(std::span<const double>(mix), alpha) +
         (1.0 - epsilon) * tsallis_negentropy(q, alpha) +
         epsilon * tsallis_negentropy(r, alpha);
}

}  // namespace fyseq
