#pragma once

#include <span>
#include <vector>

namespace hmamba {

/// Hyperboloid parameter k > 0. The manifold is
///   H^{d+1}_k = { x in R^{d+1} : <x,x>_L = -k, x0 > 0 }
/// with sectional curvature -1/k; larger k flattens the space.
struct Curvature {
  double k{1.0};

  Curvature() = default;
  explicit Curvature(double k_);

  double sqrt_k() const;
};

/// Numerical floors for the stabilized operations. Both must be positive
/// and no larger than 1e-6.
struct Tolerance {
  double eps_arcosh{1e-12};  // floor for (arcosh argument - 1)
  double eps_norm{1e-12};    // floor for norm/denominator magnitudes

  Tolerance() = default;
  Tolerance(double eps_arcosh_, double eps_norm_);
};

class LorentzPoint;

/// Lorentz (Minkowski) inner product
///   <u,v>_L = -u0*v0 + sum_{j>=1} uj*vj.
/// Throws on dimension mismatch or dimension < 2.
double lorentz_inner(std::span<const double> u, std::span<const double> v);

/// Unsigned Lorentz norm sqrt(|<v,v>_L|).
double lorentz_norm(std::span<const double> v);

/// |<x,x>_L + k| / k, the relative hyperboloid constraint violation.
double manifold_residual(std::span<const double> coords, double k);

/// A point on the upper hyperboloid sheet. The constructor enforces the
/// constraint (residual <= 1e-9, time coordinate positive).
class LorentzPoint {
 public:
  LorentzPoint(std::vector<double> coords, Curvature curvature);

  /// Skips validation; for outputs of operations that guarantee the
  /// constraint analytically.
  static LorentzPoint unchecked(std::vector<double> coords, Curvature curvature);

  static LorentzPoint origin(std::size_t spatial_dim, Curvature curvature);

  const std::vector<double>& coords() const { return coords_; }
  Curvature curvature() const { return curvature_; }
  double k() const { return curvature_.k; }
  std::size_t ambient_dim() const { return coords_.size(); }
  std::size_t spatial_dim() const { return coords_.size() - 1; }
  double time() const { return coords_[0]; }
  std::span<const double> spatial() const { return {coords_.data() + 1, coords_.size() - 1}; }

 private:
  LorentzPoint() = default;
  std::vector<double> coords_;
  Curvature curvature_;
};

/// Tangent vector anchored at a basepoint: <base, v>_L = 0 (enforced to
/// 1e-9 at construction). At the origin this forces a zero time coordinate.
class TangentVector {
 public:
  TangentVector(std::vector<double> coords, LorentzPoint basepoint);
  static TangentVector unchecked(std::vector<double> coords, LorentzPoint basepoint);

  const std::vector<double>& coords() const { return coords_; }
  const LorentzPoint& basepoint() const { return base_; }
  double k() const { return base_.k(); }

  /// For origin-anchored vectors the Lorentz norm equals the Euclidean
  /// norm of the spatial part; computed that way to avoid cancellation.
  double norm() const;

 private:
  TangentVector() : base_(LorentzPoint::origin(1, Curvature(1.0))) {}
  std::vector<double> coords_;
  LorentzPoint base_;
};

/// Geodesic distance sqrt(k) * arcosh(-<x,y>_L / k). Raw arcosh arguments
/// in [1 - 1e-6, 1) are floored at 1 + eps_arcosh; arguments below
/// 1 - 1e-6 signal a point off the manifold and throw std::domain_error.
double hyperbolic_distance(const LorentzPoint& x, const LorentzPoint& y,
                           const Tolerance& tol = Tolerance());

/// Zero-padded lift (0, e1, ..., ed) anchored at the origin.
TangentVector lift(std::span<const double> e, Curvature curvature);

/// exp_o(v) = cosh(|v|/sqrt(k)) o + sqrt(k) sinh(|v|/sqrt(k)) v/|v|,
/// with the exact origin returned when |v| < eps_norm.
LorentzPoint exp_map_origin(const TangentVector& v, const Tolerance& tol = Tolerance());

/// Inverse of exp_map_origin; returns the zero tangent vector when x is
/// the origin up to tolerance.
TangentVector log_map_origin(const LorentzPoint& x, const Tolerance& tol = Tolerance());

/// Parallel transport along the geodesic from x to y:
///   PT(v) = v - (<y - x, v>_L / <x + y, x + y>_L) (x + y).
/// A linear isometry of tangent spaces. Throws when <x+y, x+y>_L is within
/// eps_norm of zero (degenerate pair; cannot happen for on-manifold inputs).
TangentVector parallel_transport(const LorentzPoint& x, const LorentzPoint& y,
                                 const TangentVector& v,
                                 const Tolerance& tol = Tolerance());

/// Mobius gyroproduct evaluated literally over ambient coordinates with
/// unsigned squared norms |<.,.>_L|:
///
///   x (x)_k y = [(1 + 2/k <x,y>_L + 1/k |y|^2_L) x + (1 - 1/k |x|^2_L) y]
///               / [1 + 2/k <x,y>_L + 1/k^2 |x|^2_L |y|^2_L]
///
/// Inputs are formal ambient vectors (not constrained to the manifold).
/// Throws std::domain_error when the denominator magnitude falls below
/// eps_norm.
std::vector<double> mobius_product(std::span<const double> x, std::span<const double> y,
                                   Curvature curvature, const Tolerance& tol = Tolerance());

/// Stereographic projection into the open ball of radius sqrt(k):
///   x_{1:d} / (x0 + sqrt(k)).
std::vector<double> project_to_poincare(const LorentzPoint& x);

/// Renormalizes the time coordinate of an ambient vector so the result
/// satisfies <x,x>_L = -k exactly: (sqrt(k + |z_s|^2), z_s).
LorentzPoint reproject(std::span<const double> ambient, Curvature curvature);

}  // namespace hmamba
