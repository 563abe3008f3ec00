#pragma once

#include "hmamba/autodiff.hpp"
#include "hmamba/geometry.hpp"

namespace hmamba::graph {

/// Rowwise Lorentz geometry built from tape primitives. Every function
/// takes node ids of row-major 2-D tensors whose rows are ambient
/// (d+1)-vectors or spatial d-vectors, and returns a new node id.
///
/// Degenerate rows (zero tangents, points at the origin) are handled with
/// series branches selected by build-time masks, so values are exact at
/// the degenerate point and gradients stay finite everywhere.

/// Rowwise Lorentz inner product <a_r, b_r>_L. b may be a single row
/// broadcast against all rows of a. Returns (R,1).
int lorentz_inner_rows(ad::Tape& t, int a, int b);

/// exp_o applied to spatial tangent rows (R,d) -> manifold rows (R,d+1).
int exp_map_rows(ad::Tape& t, int v_spatial, const Curvature& curv);

/// log_o applied to manifold rows (R,d+1) -> spatial tangent rows (R,d).
int log_map_rows(ad::Tape& t, int points, const Curvature& curv);

/// Parallel transport of tangent rows (R,d+1) from basepoint p (1,d+1)
/// to basepoint q (1,d+1).
int parallel_transport_rows(ad::Tape& t, int tangents, int p, int q);

/// Rowwise distance between manifold rows (R,d+1) and a single manifold
/// row y (1,d+1): sqrt(k) arcosh(-<x,y>_L/k) with the spec's clamp window
/// (arguments in [1-1e-6, 1) floored at 1+eps_arcosh with zero gradient;
/// arguments below 1-1e-6 throw). Returns (R,1).
int distance_rows(ad::Tape& t, int points, int y, const Curvature& curv,
                  const Tolerance& tol = Tolerance());

/// Rowwise Mobius gyroproduct of formal ambient rows x (R,d+1) with rows
/// y (R,d+1), unsigned squared norms, denominators floored at eps_norm in
/// magnitude (zero gradient on floored rows). Returns (R,d+1).
int mobius_rows(ad::Tape& t, int x, int y, const Curvature& curv,
                const Tolerance& tol = Tolerance());

/// Renormalize ambient rows (R,d+1) back onto the hyperboloid:
/// (sqrt(k + |z_s|^2), z_s).
int reproject_rows(ad::Tape& t, int ambient, const Curvature& curv);

/// Zero time column prepended: (R,d) -> (R,d+1).
int lift_rows(ad::Tape& t, int spatial);

}  // namespace hmamba::graph
