#pragma once

#include <cmath>
#include <vector>

#include "hmamba/tensor.hpp"

namespace hmamba::bench {

/// Single-head causal self-attention forward over X (L x d), used only as
/// the quadratic-runtime reference in the benchmark command. Q = K = V = X.
/// Returns a checksum so the computation cannot be optimized away.
inline double attention_reference_forward(const Tensor& x) {
  const std::size_t L = x.rows();
  const std::size_t d = x.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> scores(L);
  std::vector<double> out(d);
  double checksum = 0.0;
  for (std::size_t t = 0; t < L; ++t) {
    double m = -1e300;
    for (std::size_t s = 0; s <= t; ++s) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += x(t, c) * x(s, c);
      scores[s] = dot * inv_sqrt_d;
      m = std::max(m, scores[s]);
    }
    double z = 0.0;
    for (std::size_t s = 0; s <= t; ++s) {
      scores[s] = std::exp(scores[s] - m);
      z += scores[s];
    }
    for (std::size_t c = 0; c < d; ++c) out[c] = 0.0;
    for (std::size_t s = 0; s <= t; ++s) {
      double w = scores[s] / z;
      for (std::size_t c = 0; c < d; ++c) out[c] += w * x(s, c);
    }
    checksum += out[t % d];
  }
  return checksum;
}

}  // namespace hmamba::bench
