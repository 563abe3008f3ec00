#include "hmamba/manifold_graph.hpp"

#include <cmath>
#include <stdexcept>

namespace hmamba::graph {

namespace {

// Thresholds for switching to series branches, in squared-norm units.
constexpr double kExpSeriesQOverK = 1e-8;   // q/k below this: sinhc/cosh series
constexpr double kLogSeriesU = 1e-5;        // u = x0/sqrt(k)-1 below this: arcosh series

// Complementary 0/1 masks over rows, chosen from forward values.
struct RowMasks {
  Tensor on;   // rows where pred holds
  Tensor off;  // complement
  bool any_on{false};
  bool any_off{false};
};

template <typename Pred>
RowMasks row_masks(const Tensor& column, Pred pred) {
  RowMasks m;
  m.on = Tensor(column.rows(), 1, 0.0);
  m.off = Tensor(column.rows(), 1, 0.0);
  for (std::size_t r = 0; r < column.rows(); ++r) {
    if (pred(column(r, 0))) {
      m.on(r, 0) = 1.0;
      m.any_on = true;
    } else {
      m.off(r, 0) = 1.0;
      m.any_off = true;
    }
  }
  return m;
}

}  // namespace

int lorentz_inner_rows(ad::Tape& t, int a, int b) {
  int p = t.mul(a, b);
  int s = t.row_sum(p);
  int p0 = t.slice_cols(p, 0, 1);
  return t.sub(s, t.scale(p0, 2.0));
}

int lift_rows(ad::Tape& t, int spatial) {
  const Tensor& v = t.val(spatial);
  int zeros = t.constant(Tensor(v.rows(), 1, 0.0));
  return t.concat_cols(zeros, spatial);
}

int exp_map_rows(ad::Tape& t, int v_spatial, const Curvature& curv) {
  const double k = curv.k;
  const double sk = curv.sqrt_k();
  int q = t.row_sum(t.mul(v_spatial, v_spatial));  // squared spatial norm, (R,1)

  RowMasks m = row_masks(t.val(q), [&](double x) { return x / k < kExpSeriesQOverK; });
  int mask_small = t.constant(m.on);
  int mask_big = t.constant(m.off);

  // sinhc factor S = sqrt(k) sinh(r/sqrt(k)) / r as a function of q = r^2:
  // series 1 + q/6k + q^2/120k^2 near zero (exact at q = 0), closed form
  // elsewhere with a +1 guard under the sqrt on the masked rows.
  int q2 = t.mul(q, q);
  int s_series = t.add_const(
      t.add(t.scale(q, 1.0 / (6.0 * k)), t.scale(q2, 1.0 / (120.0 * k * k))), 1.0);
  int q_guard = t.add(q, mask_small);
  int r = t.sqrt(q_guard);
  int s_closed = t.div(t.scale(t.sinh(t.scale(r, 1.0 / sk)), sk), r);
  int s = t.add(t.mul(mask_small, s_series), t.mul(mask_big, s_closed));

  // Time coordinate from the constraint identity sqrt(k + |x_s|^2); this
  // matches sqrt(k) cosh(r/sqrt(k)) analytically and keeps the residual at
  // the representability floor.
  int xs = t.mul(v_spatial, s);
  int time = t.sqrt(t.add_const(t.row_sum(t.mul(xs, xs)), k));
  return t.concat_cols(time, xs);
}

int log_map_rows(ad::Tape& t, int points, const Curvature& curv) {
  const double sk = curv.sqrt_k();
  const Tensor& x = t.val(points);
  const int d1 = static_cast<int>(x.cols());
  int x0 = t.slice_cols(points, 0, 1);
  int xs = t.slice_cols(points, 1, d1);

  // u = x0/sqrt(k) - 1 >= 0 up to fp noise. The spatial factor is
  // G(u) = arcosh(1+u)/sqrt(2u+u^2) -> 1 as u -> 0.
  int u = t.add_const(t.scale(x0, 1.0 / sk), -1.0);
  RowMasks m = row_masks(t.val(u), [](double v) { return v < kLogSeriesU; });
  int mask_small = t.constant(m.on);
  int mask_big = t.constant(m.off);

  // Series: G = 1 - u/3 + 2u^2/15.
  int u2 = t.mul(u, u);
  int g_series =
      t.add_const(t.add(t.scale(u, -1.0 / 3.0), t.scale(u2, 2.0 / 15.0)), 1.0);

  // Closed form with guards on masked rows: +1 under the sqrt, and the
  // arcosh argument pinned to 2 so its derivative stays finite (those rows
  // carry a zero adjoint through the mask).
  int m2 = t.add(t.add(t.scale(u, 2.0), u2), mask_small);
  int arg = t.add(t.add_const(t.mul(u, mask_big), 1.0), mask_small);
  int g_closed = t.div(t.acosh(arg), t.sqrt(m2));

  int g = t.add(t.mul(mask_small, g_series), t.mul(mask_big, g_closed));
  return t.mul(xs, g);
}

int parallel_transport_rows(ad::Tape& t, int tangents, int p, int q) {
  int s = t.add(p, q);
  int denom = lorentz_inner_rows(t, s, s);      // (1,1)
  int dvec = t.sub(q, p);                       // (1,d+1)
  int ip = lorentz_inner_rows(t, tangents, dvec);  // (R,1)
  int coef = t.div(ip, denom);
  return t.sub(tangents, t.matmul(coef, s));
}

int distance_rows(ad::Tape& t, int points, int y, const Curvature& curv,
                  const Tolerance& tol) {
  const double k = curv.k;
  int ip = lorentz_inner_rows(t, points, y);
  int arg = t.scale(ip, -1.0 / k);

  // Arguments are floored at 1 + eps_arcosh with zero gradient on floored
  // rows. Unlike the plain value function the floor also covers [1, 1+eps):
  // acosh has an infinite derivative at exactly 1, and coincident points
  // (zero distance) do occur, e.g. under an identity-initialized encoder.
  const Tensor& av = t.val(arg);
  const double floor_arg = 1.0 + tol.eps_arcosh;
  Tensor clamped_vals(av.rows(), 1, 0.0);
  RowMasks m = row_masks(av, [&](double v) { return v >= floor_arg; });
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double v = av(r, 0);
    if (v < 1.0 - 1e-6) {
      throw std::domain_error("distance_rows: arcosh argument below domain (off-manifold)");
    }
    if (v < floor_arg) clamped_vals(r, 0) = floor_arg;
  }
  int mask_ok = t.constant(m.on);
  int floor_col = t.constant(clamped_vals);
  int arg_safe = t.add(t.mul(arg, mask_ok), floor_col);
  return t.scale(t.acosh(arg_safe), curv.sqrt_k());
}

int mobius_rows(ad::Tape& t, int x, int y, const Curvature& curv, const Tolerance& tol) {
  const double k = curv.k;
  int ixy = lorentz_inner_rows(t, x, y);
  int nx = t.abs(lorentz_inner_rows(t, x, x));
  int ny = t.abs(lorentz_inner_rows(t, y, y));

  int two_ixy = t.scale(ixy, 2.0 / k);
  int cx = t.add_const(t.add(two_ixy, t.scale(ny, 1.0 / k)), 1.0);
  int cy = t.add_const(t.scale(nx, -1.0 / k), 1.0);
  int den = t.add_const(t.add(two_ixy, t.scale(t.mul(nx, ny), 1.0 / (k * k))), 1.0);

  // Rows with |den| < eps_norm are replaced by a signed floor constant.
  const Tensor& dv = t.val(den);
  RowMasks m = row_masks(dv, [&](double v) { return std::fabs(v) >= tol.eps_norm; });
  Tensor floor_vals(dv.rows(), 1, 0.0);
  for (std::size_t r = 0; r < dv.rows(); ++r) {
    if (m.on(r, 0) == 0.0) {
      floor_vals(r, 0) = dv(r, 0) >= 0.0 ? tol.eps_norm : -tol.eps_norm;
    }
  }
  int den_safe = t.add(t.mul(den, t.constant(m.on)), t.constant(floor_vals));

  int num = t.add(t.mul(x, cx), t.mul(y, cy));
  return t.div(num, den_safe);
}

int reproject_rows(ad::Tape& t, int ambient, const Curvature& curv) {
  const Tensor& z = t.val(ambient);
  int zs = t.slice_cols(ambient, 1, static_cast<int>(z.cols()));
  int q = t.row_sum(t.mul(zs, zs));
  int time = t.sqrt(t.add_const(q, curv.k));
  return t.concat_cols(time, zs);
}

}  // namespace hmamba::graph
