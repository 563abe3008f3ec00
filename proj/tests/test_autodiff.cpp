#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hmamba/autodiff.hpp"
#include "hmamba/manifold_graph.hpp"
#include "testutil.hpp"

using namespace hmamba;
using ad::Tape;
using testutil::max_grad_err;

TEST_CASE("scalar calculus sanity") {
  SUBCASE("d/dx x^2 at 3") {
    Tape t;
    int x = t.leaf(Tensor::scalar(3.0));
    int y = t.mul(x, x);
    t.backward(y);
    CHECK(t.grad(x)[0] == doctest::Approx(6.0));
  }
  SUBCASE("d/dx cosh at 1") {
    Tape t;
    int x = t.leaf(Tensor::scalar(1.0));
    int y = t.cosh(x);
    t.backward(y);
    CHECK(t.grad(x)[0] == doctest::Approx(std::sinh(1.0)).epsilon(1e-14));
  }
  SUBCASE("d/dx arcosh at 2") {
    Tape t;
    int x = t.leaf(Tensor::scalar(2.0));
    int y = t.acosh(x);
    t.backward(y);
    CHECK(t.grad(x)[0] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
  }
  SUBCASE("acosh domain") {
    Tape t;
    int x = t.leaf(Tensor::scalar(0.5));
    CHECK_THROWS_AS(t.acosh(x), std::domain_error);
  }
}

namespace {

Tensor random_tensor(testutil::Rng& rng, std::size_t r, std::size_t c, double lo = -2.0,
                     double hi = 2.0) {
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("elementwise primitives match central differences") {
  testutil::Rng rng(7);
  auto check_unary = [&](auto op, double lo, double hi, double tol = 2e-7) {
    Tensor x = random_tensor(rng, 3, 4, lo, hi);
    double err = max_grad_err(x, [&](Tape& t, int leaf) { return t.sum_all(op(t, leaf)); });
    CHECK(err <= tol);
  };
  check_unary([](Tape& t, int a) { return t.exp(a); }, -1.5, 1.5);
  check_unary([](Tape& t, int a) { return t.expm1(a); }, -1.5, 1.5);
  check_unary([](Tape& t, int a) { return t.log(a); }, 0.2, 3.0);
  check_unary([](Tape& t, int a) { return t.sqrt(a); }, 0.2, 3.0);
  check_unary([](Tape& t, int a) { return t.cosh(a); }, -2.0, 2.0);
  check_unary([](Tape& t, int a) { return t.sinh(a); }, -2.0, 2.0);
  check_unary([](Tape& t, int a) { return t.acosh(a); }, 1.1, 3.0);
  check_unary([](Tape& t, int a) { return t.softplus(a); }, -3.0, 3.0);
  check_unary([](Tape& t, int a) { return t.sigmoid(a); }, -3.0, 3.0);
  check_unary([](Tape& t, int a) { return t.silu(a); }, -3.0, 3.0);
  check_unary([](Tape& t, int a) { return t.abs(a); }, 0.2, 2.0);
  check_unary([](Tape& t, int a) { return t.neg(a); }, -2.0, 2.0);
  check_unary([](Tape& t, int a) { return t.scale(a, -1.7); }, -2.0, 2.0);
  check_unary([](Tape& t, int a) { return t.add_const(a, 0.3); }, -2.0, 2.0);
}

TEST_CASE("clamp gradient is a hard window") {
  Tape t;
  Tensor x(1, 4);
  x[0] = -2.0;  // below
  x[1] = 0.5;   // inside
  x[2] = 2.0;   // above
  x[3] = 1.0;   // on the boundary counts as inside
  int leaf = t.leaf(x);
  int y = t.sum_all(t.clamp(leaf, -1.0, 1.0));
  t.backward(y);
  CHECK(t.grad(leaf)[0] == 0.0);
  CHECK(t.grad(leaf)[1] == 1.0);
  CHECK(t.grad(leaf)[2] == 0.0);
  CHECK(t.grad(leaf)[3] == 1.0);
}

TEST_CASE("binary ops and broadcasting match central differences") {
  testutil::Rng rng(17);
  auto check_pair = [&](std::size_t ra, std::size_t ca, std::size_t rb, std::size_t cb,
                        auto op) {
    Tensor a = random_tensor(rng, ra, ca, 0.5, 2.0);
    Tensor b = random_tensor(rng, rb, cb, 0.5, 2.0);
    // gradient w.r.t. the first operand
    double ea = max_grad_err(
        a, [&](Tape& t, int leaf) { return t.sum_all(op(t, leaf, t.constant(b))); });
    CHECK(ea <= 2e-7);
    // and the second
    double eb = max_grad_err(
        b, [&](Tape& t, int leaf) { return t.sum_all(op(t, t.constant(a), leaf)); });
    CHECK(eb <= 2e-7);
  };
  auto add_op = [](Tape& t, int a, int b) { return t.add(a, b); };
  auto sub_op = [](Tape& t, int a, int b) { return t.sub(a, b); };
  auto mul_op = [](Tape& t, int a, int b) { return t.mul(a, b); };
  auto div_op = [](Tape& t, int a, int b) { return t.div(a, b); };
  for (auto op : {+add_op, +sub_op, +mul_op, +div_op}) {
    check_pair(3, 4, 3, 4, op);  // same shape
    check_pair(3, 4, 1, 4, op);  // row broadcast
    check_pair(3, 4, 3, 1, op);  // column broadcast
    check_pair(3, 4, 1, 1, op);  // scalar broadcast
  }
  Tape t;
  int a = t.leaf(random_tensor(rng, 2, 3));
  int b = t.leaf(random_tensor(rng, 3, 3));
  CHECK_THROWS_AS(t.add(a, b), std::invalid_argument);
}

TEST_CASE("structural ops match central differences") {
  testutil::Rng rng(27);
  Tensor a = random_tensor(rng, 3, 4);
  Tensor b = random_tensor(rng, 4, 2);

  SUBCASE("matmul, both sides") {
    CHECK(max_grad_err(a, [&](Tape& t, int leaf) {
            return t.sum_all(t.matmul(leaf, t.constant(b)));
          }) <= 2e-7);
    CHECK(max_grad_err(b, [&](Tape& t, int leaf) {
            return t.sum_all(t.matmul(t.constant(a), leaf));
          }) <= 2e-7);
  }
  SUBCASE("transpose, slices, shift, concat, rowsum, mean") {
    CHECK(max_grad_err(a, [&](Tape& t, int leaf) {
            return t.sum_all(t.mul(t.transpose(leaf), t.transpose(leaf)));
          }) <= 2e-7);
    CHECK(max_grad_err(a, [&](Tape& t, int leaf) {
            return t.sum_all(t.mul(t.slice_cols(leaf, 1, 3), t.slice_cols(leaf, 2, 4)));
          }) <= 2e-6);
    CHECK(max_grad_err(a, [&](Tape& t, int leaf) {
            return t.sum_all(t.mul(t.slice_rows(leaf, 0, 2), t.slice_rows(leaf, 1, 3)));
          }) <= 2e-6);
    CHECK(max_grad_err(a, [&](Tape& t, int leaf) {
            return t.sum_all(t.mul(t.shift_rows(leaf, 1), leaf));
          }) <= 2e-7);
    CHECK(max_grad_err(a, [&](Tape& t, int leaf) {
            return t.mean_all(t.mul(t.concat_cols(leaf, leaf), t.concat_cols(leaf, leaf)));
          }) <= 2e-7);
    CHECK(max_grad_err(a, [&](Tape& t, int leaf) {
            return t.sum_all(t.mul(t.row_sum(leaf), t.row_sum(leaf)));
          }) <= 2e-7);
  }
  SUBCASE("gather accumulates into repeated rows") {
    Tensor table = random_tensor(rng, 5, 3);
    CHECK(max_grad_err(table, [&](Tape& t, int leaf) {
            int g = t.gather_rows(leaf, {0, 2, 2, 4});
            return t.sum_all(t.mul(g, g));
          }) <= 2e-7);
  }
  SUBCASE("stack_rows routes adjoints to each input") {
    Tensor row = random_tensor(rng, 1, 4);
    CHECK(max_grad_err(row, [&](Tape& t, int leaf) {
            int doubled = t.scale(leaf, 2.0);
            int stacked = t.stack_rows({leaf, doubled, leaf});
            return t.sum_all(t.mul(stacked, stacked));
          }) <= 2e-7);
  }
}

TEST_CASE("manifold composites match the plain geometry functions") {
  testutil::Rng rng(37);
  for (double kv : {0.25, 1.0, 4.0}) {
    Curvature k(kv);
    Tensor e = random_tensor(rng, 6, 3, -1.5, 1.5);

    Tape t;
    int leaf = t.constant(e);
    int pts = graph::exp_map_rows(t, leaf, k);
    int logs = graph::log_map_rows(t, pts, k);
    for (std::size_t r = 0; r < 6; ++r) {
      LorentzPoint p = exp_map_origin(lift(e.row_span(r), k));
      for (int j = 0; j < 4; ++j) {
        CHECK(std::fabs(t.val(pts)(r, j) - p.coords()[j]) <= 1e-12);
      }
      for (int j = 0; j < 3; ++j) {
        CHECK(std::fabs(t.val(logs)(r, j) - e(r, j)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("graph distance and transport agree with the plain functions") {
  testutil::Rng rng(47);
  Curvature k(2.0);
  for (int i = 0; i < 50; ++i) {
    LorentzPoint x = testutil::random_point(rng, 3, k);
    LorentzPoint y = testutil::random_point(rng, 3, k);
    TangentVector v = testutil::random_tangent_at(rng, x);

    Tape t;
    int xs = t.constant(Tensor::row(x.coords()));
    int ys = t.constant(Tensor::row(y.coords()));
    int vs = t.constant(Tensor::row(v.coords()));
    int d = graph::distance_rows(t, xs, ys, k);
    CHECK(std::fabs(t.val(d)(0, 0) - hyperbolic_distance(x, y)) <= 1e-10);

    int pt = graph::parallel_transport_rows(t, vs, xs, ys);
    TangentVector w = parallel_transport(x, y, v);
    for (int j = 0; j < 4; ++j) CHECK(std::fabs(t.val(pt)(0, j) - w.coords()[j]) <= 1e-10);

    int mob = graph::mobius_rows(t, vs, ys, k);
    std::vector<double> mp = mobius_product(v.coords(), y.coords(), k);
    for (int j = 0; j < 4; ++j) CHECK(std::fabs(t.val(mob)(0, j) - mp[j]) <= 1e-10);
  }
}

TEST_CASE("manifold composite gradients match central differences") {
  testutil::Rng rng(57);
  Curvature k(1.5);
  Tensor e = random_tensor(rng, 4, 3, -1.0, 1.0);
  Tensor target_sp = random_tensor(rng, 1, 3, -0.8, 0.8);
  LorentzPoint target = exp_map_origin(lift(target_sp.row_span(0), k));

  SUBCASE("exp then log round trip") {
    CHECK(max_grad_err(e, [&](Tape& t, int leaf) {
            int p = graph::exp_map_rows(t, leaf, k);
            int l = graph::log_map_rows(t, p, k);
            return t.sum_all(t.mul(l, l));
          }, 1e-6) <= 1e-6);
  }
  SUBCASE("distance to a fixed point") {
    CHECK(max_grad_err(e, [&](Tape& t, int leaf) {
            int p = graph::exp_map_rows(t, leaf, k);
            int d = graph::distance_rows(t, p, t.constant(Tensor::row(target.coords())), k);
            return t.sum_all(d);
          }, 1e-6) <= 1e-6);
  }
  SUBCASE("mobius residual junction with reprojection") {
    CHECK(max_grad_err(e, [&](Tape& t, int leaf) {
            int p = graph::exp_map_rows(t, leaf, k);
            int lifted = graph::lift_rows(t, t.scale(leaf, 0.3));
            int z = graph::mobius_rows(t, lifted, p, k);
            int out = graph::reproject_rows(t, z, k);
            return t.sum_all(t.mul(out, out));
          }, 1e-6) <= 1e-6);
  }
  SUBCASE("exact zero rows stay differentiable") {
    Tensor zr(3, 3, 0.0);
    zr(1, 0) = 0.4;  // one non-degenerate row
    CHECK(max_grad_err(zr, [&](Tape& t, int leaf) {
            int p = graph::exp_map_rows(t, leaf, k);
            return t.sum_all(t.mul(p, p));
          }, 1e-6) <= 1e-6);
  }
}

TEST_CASE("gradient w.r.t. an origin-tangent input has a zero time component") {
  testutil::Rng rng(67);
  Curvature k(1.0);
  Tensor full(4, 4, 0.0);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 1; c < 4; ++c) full(r, c) = rng.normal();
  }
  Tape t;
  int leaf = t.leaf(full);  // origin-tangent rows, time column zero
  int spatial = t.slice_cols(leaf, 1, 4);
  int p = graph::exp_map_rows(t, spatial, k);
  int d = graph::distance_rows(
      t, p, t.constant(Tensor::row(LorentzPoint::origin(3, k).coords())), k);
  int loss = t.sum_all(t.mul(d, d));
  t.backward(loss);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(t.grad(leaf)(r, 0) == 0.0);
    // and the spatial part actually receives gradient
  }
  double total = 0.0;
  for (std::size_t i = 0; i < t.grad(leaf).size(); ++i) total += std::fabs(t.grad(leaf)[i]);
  CHECK(total > 0.0);
}

TEST_CASE("backward requires a scalar root") {
  Tape t;
  int x = t.leaf(Tensor(2, 2, 1.0));
  CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}
