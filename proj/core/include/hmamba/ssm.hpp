#pragma once

#include <span>
#include <vector>

#include "hmamba/geometry.hpp"
#include "hmamba/tensor.hpp"

namespace hmamba {

/// Continuous state-space parameters with a diagonal transition matrix.
/// A is stored as a length-d_state vector of strictly negative entries so
/// that exp(delta * A) stays inside (0,1) for any positive step.
struct SsmParams {
  std::vector<double> a;   // diagonal of A, all entries < 0
  Tensor b;                // d_state x d_in
  Tensor c;                // d_out x d_state
  std::vector<double> log_delta_bias;

  int d_state() const { return static_cast<int>(a.size()); }
  int d_in() const { return static_cast<int>(b.cols()); }
  int d_out() const { return static_cast<int>(c.rows()); }

  void validate() const;  // throws on non-negative A entries or shape mismatch
};

/// One discretized step of the recurrence h_t = a_bar (.) h_{t-1} + b_bar_x.
struct DiscretizedStep {
  std::vector<double> a_bar;    // per-state, inside (0,1) for A<0, delta>0
  std::vector<double> b_bar_x;  // B_bar * x_t, precomputed
  double delta{0.0};
};

/// Exact zero-order-hold discretization of h' = a h + b x over a step:
///   a_bar = exp(delta a),  b_bar = (exp(delta a) - 1) / a * b,
/// with the series limit b_bar = delta b below |delta a| = 1e-8.
/// Throws std::invalid_argument when delta <= 0.
struct ZohResult {
  double a_bar;
  double b_bar;
};
ZohResult zoh_discretize(double a, double b, double delta);

/// Curvature-normalized discretization exp(delta a (.) K(k)) where K(k)
/// scales the first state channel by sqrt(k) and leaves the rest at 1.
/// Reduces to the plain ZOH a_bar when k = 1.
std::vector<double> curvature_discretize(std::span<const double> a, double delta,
                                         Curvature k);

/// Input-dependent per-token parameters:
///   delta = softplus(w_delta . x + bias) > 0, B_t = W_B x, C_t = W_C x.
struct SelectiveProjection {
  std::vector<double> w_delta;  // d_in
  double delta_bias{0.0};
  Tensor w_b;  // d_state x d_in
  Tensor w_c;  // d_state x d_in
};
struct SelectiveParams {
  double delta;
  std::vector<double> b_t;
  std::vector<double> c_t;
};
SelectiveParams selective_params(std::span<const double> x_t, const SelectiveProjection& w);

/// Left-to-right recurrence h_t = a_bar_t (.) h_{t-1} + b_bar_x_t with
/// read-out y_t = C_t h_t, h_0 = 0. O(L d_state d_out) time. The input x
/// is used for length validation (b_bar_x already folds it in).
Tensor ssm_scan(std::span<const DiscretizedStep> steps, std::span<const Tensor> c_per_token,
                const Tensor& x);

/// Training-mode identity of the time-invariant system: builds the kernel
/// K_j = C A_bar^j B_bar and returns the causal convolution x * K.
Tensor ssm_conv(std::span<const double> a_bar, const Tensor& b_bar, const Tensor& c,
                const Tensor& x);

/// Guard for the convolution path: per-token (selective) parameters are an
/// unsupported mode and throw std::invalid_argument.
Tensor ssm_conv(std::span<const DiscretizedStep> steps, std::span<const Tensor> c_per_token,
                const Tensor& x);

/// Depthwise causal convolution of x (L x d) with kernel (w x d); tap 0 is
/// the oldest position, position t reads x_{t-w+1..t} with zero padding.
Tensor causal_conv1d(const Tensor& x, const Tensor& kernel);

}  // namespace hmamba
