#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fyseq/entmax.hpp"
#include "fyseq/rng.hpp"

namespace testutil {

inline fyseq::LogitVector random_logits(fyseq::Rng& rng, std::size_t dim,
                                        double lo = -10.0, double hi = 10.0) {
  fyseq::LogitVector z(dim);
  for (double& v : z) v = rng.uniform(lo, hi);
  return z;
}

inline std::vector<double> random_simplex_point(fyseq::Rng& rng, std::size_t dim) {
  std::vector<double> p(dim);
  double sum = 0.0;
  for (double& v : p) {
    v = -std::log(1.0 - rng.uniform());  // exponential draws normalize to a simplex point
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace testutil
