#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "hmamba/autodiff.hpp"
#include "hmamba/geometry.hpp"
#include "hmamba/rng.hpp"
#include "hmamba/tensor.hpp"

namespace testutil {

using hmamba::Curvature;
using hmamba::LorentzPoint;
using hmamba::Rng;
using hmamba::TangentVector;
using hmamba::Tensor;

inline TangentVector random_origin_tangent(Rng& rng, std::size_t d, Curvature k,
                                           double max_norm) {
  std::vector<double> e(d);
  double n2 = 0.0;
  for (auto& v : e) {
    v = rng.normal();
    n2 += v * v;
  }
  double target = rng.uniform(0.0, max_norm);
  double n = std::sqrt(n2);
  if (n > 0) {
    for (auto& v : e) v *= target / n;
  }
  return hmamba::lift(e, k);
}

inline LorentzPoint random_point(Rng& rng, std::size_t d, Curvature k, double max_norm = 3.0) {
  return hmamba::exp_map_origin(random_origin_tangent(rng, d, k, max_norm));
}

/// Random tangent vector at an arbitrary basepoint: project an ambient
/// vector onto the tangent space, w + (<x,w>_L / k) x.
inline TangentVector random_tangent_at(Rng& rng, const LorentzPoint& x) {
  std::size_t n = x.ambient_dim();
  std::vector<double> w(n);
  for (auto& v : w) v = rng.normal();
  double ip = hmamba::lorentz_inner(x.coords(), w);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = w[j] + ip / x.k() * x.coords()[j];
  return TangentVector::unchecked(std::move(out), x);
}

/// Central-difference gradient of a scalar built from one leaf tensor.
/// builder must create the whole graph from the given tape and leaf id and
/// return the scalar node.
inline Tensor tape_numeric_grad(const Tensor& x0,
                                const std::function<int(hmamba::ad::Tape&, int)>& builder,
                                double h = 1e-6) {
  Tensor g(x0.rows(), x0.cols(), 0.0);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    Tensor up = x0, down = x0;
    up[i] += h;
    down[i] -= h;
    hmamba::ad::Tape t1, t2;
    double fu = t1.val(builder(t1, t1.leaf(up)))[0];
    double fd = t2.val(builder(t2, t2.leaf(down)))[0];
    g[i] = (fu - fd) / (2.0 * h);
  }
  return g;
}

/// Analytic gradient of the same construction.
inline Tensor tape_analytic_grad(const Tensor& x0,
                                 const std::function<int(hmamba::ad::Tape&, int)>& builder) {
  hmamba::ad::Tape t;
  int leaf = t.leaf(x0);
  int root = builder(t, leaf);
  t.backward(root);
  if (!t.has_grad(leaf)) return Tensor(x0.rows(), x0.cols(), 0.0);
  return t.grad(leaf);
}

inline double max_grad_err(const Tensor& x0,
                           const std::function<int(hmamba::ad::Tape&, int)>& builder,
                           double h = 1e-6) {
  Tensor a = tape_analytic_grad(x0, builder);
  Tensor n = tape_numeric_grad(x0, builder, h);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double err = std::fabs(a[i] - n[i]) / std::max({std::fabs(a[i]), std::fabs(n[i]), 1e-3});
    worst = std::max(worst, err);
  }
  return worst;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t pos = 0; pos < idx.size(); ++pos) r[idx[pos]] = static_cast<double>(pos);
    return r;
  };
  std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= ra.size();
  mb /= rb.size();
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace testutil
