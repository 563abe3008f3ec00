#include "hmamba/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hmamba {

namespace {

constexpr double kManifoldTol = 1e-9;
constexpr double kTangencyTol = 1e-9;

// Constraint tolerance with the binary64 representability floor: for a
// point at time coordinate x0 the squared term -x0^2 cannot be resolved
// below a few ulp, so far-out points carry proportionally more residual.
double manifold_tol(double time, double k) {
  return kManifoldTol + 64.0 * std::numeric_limits<double>::epsilon() * (time * time) / k;
}
constexpr double kArcoshRejectBelow = 1e-6;  // raw arg < 1 - this is an error

void check_same_dim(std::span<const double> u, std::span<const double> v,
                    const char* what) {
  if (u.size() != v.size()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()));
  }
  if (u.size() < 2) {
    throw std::invalid_argument(std::string(what) + ": need dimension >= 2");
  }
}

double spatial_norm2(std::span<const double> v) {
  double s = 0.0;
  for (std::size_t j = 1; j < v.size(); ++j) s += v[j] * v[j];
  return s;
}

}  // namespace

Curvature::Curvature(double k_) : k(k_) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw std::invalid_argument("Curvature: k must be positive and finite");
  }
}

double Curvature::sqrt_k() const { return std::sqrt(k); }

Tolerance::Tolerance(double eps_arcosh_, double eps_norm_)
    : eps_arcosh(eps_arcosh_), eps_norm(eps_norm_) {
  if (!(eps_arcosh > 0.0) || eps_arcosh > 1e-6 || !(eps_norm > 0.0) || eps_norm > 1e-6) {
    throw std::invalid_argument("Tolerance: values must be in (0, 1e-6]");
  }
}

double lorentz_inner(std::span<const double> u, std::span<const double> v) {
  check_same_dim(u, v, "lorentz_inner");
  double s = -u[0] * v[0];
  for (std::size_t j = 1; j < u.size(); ++j) s += u[j] * v[j];
  return s;
}

double lorentz_norm(std::span<const double> v) {
  return std::sqrt(std::fabs(lorentz_inner(v, v)));
}

double manifold_residual(std::span<const double> coords, double k) {
  return std::fabs(lorentz_inner(coords, coords) + k) / k;
}

LorentzPoint::LorentzPoint(std::vector<double> coords, Curvature curvature)
    : coords_(std::move(coords)), curvature_(curvature) {
  if (coords_.size() < 2) {
    throw std::invalid_argument("LorentzPoint: need dimension >= 2");
  }
  if (!(coords_[0] > 0.0)) {
    throw std::domain_error("LorentzPoint: time coordinate must be positive");
  }
  if (manifold_residual(coords_, curvature_.k) > manifold_tol(coords_[0], curvature_.k)) {
    throw std::domain_error("LorentzPoint: off the hyperboloid, residual " +
                            std::to_string(manifold_residual(coords_, curvature_.k)));
  }
}

LorentzPoint LorentzPoint::unchecked(std::vector<double> coords, Curvature curvature) {
  LorentzPoint p;
  p.coords_ = std::move(coords);
  p.curvature_ = curvature;
  return p;
}

LorentzPoint LorentzPoint::origin(std::size_t spatial_dim, Curvature curvature) {
  std::vector<double> c(spatial_dim + 1, 0.0);
  c[0] = curvature.sqrt_k();
  return unchecked(std::move(c), curvature);
}

TangentVector::TangentVector(std::vector<double> coords, LorentzPoint basepoint)
    : coords_(std::move(coords)), base_(std::move(basepoint)) {
  if (coords_.size() != base_.ambient_dim()) {
    throw std::invalid_argument("TangentVector: dimension mismatch with basepoint");
  }
  double ip = lorentz_inner(base_.coords(), coords_);
  double scale = std::max(1.0, lorentz_norm(coords_)) * std::max(1.0, base_.time());
  if (std::fabs(ip) > kTangencyTol * scale) {
    throw std::domain_error("TangentVector: not Lorentz-orthogonal to basepoint");
  }
}

TangentVector TangentVector::unchecked(std::vector<double> coords, LorentzPoint basepoint) {
  TangentVector v;
  v.coords_ = std::move(coords);
  v.base_ = std::move(basepoint);
  return v;
}

double TangentVector::norm() const {
  // Origin-anchored vectors have a zero time coordinate, so the Lorentz
  // norm reduces to the Euclidean norm of the spatial part.
  if (base_.coords()[0] == base_.curvature().sqrt_k() &&
      spatial_norm2(base_.coords()) == 0.0) {
    return std::sqrt(spatial_norm2(coords_));
  }
  return lorentz_norm(coords_);
}

double hyperbolic_distance(const LorentzPoint& x, const LorentzPoint& y,
                           const Tolerance& tol) {
  if (x.k() != y.k()) {
    throw std::invalid_argument("hyperbolic_distance: curvature mismatch");
  }
  double k = x.k();
  double arg = -lorentz_inner(x.coords(), y.coords()) / k;
  if (arg < 1.0 - kArcoshRejectBelow) {
    throw std::domain_error("hyperbolic_distance: arcosh argument " +
                            std::to_string(arg) + " below domain (off-manifold input)");
  }
  if (arg < 1.0) arg = 1.0 + tol.eps_arcosh;
  return std::sqrt(k) * std::acosh(arg);
}

TangentVector lift(std::span<const double> e, Curvature curvature) {
  std::vector<double> c(e.size() + 1, 0.0);
  for (std::size_t j = 0; j < e.size(); ++j) c[j + 1] = e[j];
  return TangentVector::unchecked(std::move(c), LorentzPoint::origin(e.size(), curvature));
}

LorentzPoint exp_map_origin(const TangentVector& v, const Tolerance& tol) {
  const Curvature curv = v.basepoint().curvature();
  const double sk = curv.sqrt_k();
  const std::size_t n = v.coords().size();
  double r = v.norm();
  if (r < tol.eps_norm) {
    return LorentzPoint::origin(n - 1, curv);
  }
  std::vector<double> out(n, 0.0);
  double s = sk * std::sinh(r / sk) / r;
  double q = 0.0;
  for (std::size_t j = 1; j < n; ++j) {
    out[j] = s * v.coords()[j];  // the time part of v is zero at the origin
    q += out[j] * out[j];
  }
  // sqrt(k + |x_s|^2) equals sqrt(k) cosh(r/sqrt(k)) analytically but pins
  // the constraint residual at the representability floor (one rounding of
  // the square) instead of combining two large roundings.
  out[0] = std::sqrt(curv.k + q);
  return LorentzPoint::unchecked(std::move(out), curv);
}

TangentVector log_map_origin(const LorentzPoint& x, const Tolerance& tol) {
  const Curvature curv = x.curvature();
  const double k = curv.k;
  const double sk = curv.sqrt_k();
  const std::size_t n = x.ambient_dim();
  const LorentzPoint o = LorentzPoint::origin(n - 1, curv);

  // Orthogonal component x + (1/k)<o,x>_L o has a zero time coordinate at
  // the origin: it is exactly (0, x_spatial).
  double m = std::sqrt(spatial_norm2(x.coords()));
  double arg = x.time() / sk;  // equals -<o,x>_L / k
  if (arg < 1.0) arg = 1.0;    // fp noise on on-manifold points
  double dist = sk * std::acosh(arg);
  std::vector<double> out(n, 0.0);
  if (dist < tol.eps_norm) {
    return TangentVector::unchecked(std::move(out), o);
  }
  if (m < tol.eps_norm) {
    throw std::domain_error("log_map_origin: degenerate spatial component for non-origin point");
  }
  for (std::size_t j = 1; j < n; ++j) out[j] = dist * x.coords()[j] / m;
  return TangentVector::unchecked(std::move(out), o);
}

TangentVector parallel_transport(const LorentzPoint& x, const LorentzPoint& y,
                                 const TangentVector& v, const Tolerance& tol) {
  if (x.k() != y.k() || x.k() != v.k()) {
    throw std::invalid_argument("parallel_transport: curvature mismatch");
  }
  const std::size_t n = x.ambient_dim();
  if (y.ambient_dim() != n || v.coords().size() != n) {
    throw std::invalid_argument("parallel_transport: dimension mismatch");
  }
  std::vector<double> s(n), d(n);
  for (std::size_t j = 0; j < n; ++j) {
    s[j] = x.coords()[j] + y.coords()[j];
    d[j] = y.coords()[j] - x.coords()[j];
  }
  double denom = lorentz_inner(s, s);
  if (std::fabs(denom) < tol.eps_norm) {
    throw std::domain_error("parallel_transport: degenerate pair, <x+y,x+y>_L ~ 0");
  }
  double coef = lorentz_inner(d, v.coords()) / denom;
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = v.coords()[j] - coef * s[j];
  return TangentVector::unchecked(std::move(out), y);
}

std::vector<double> mobius_product(std::span<const double> x, std::span<const double> y,
                                   Curvature curvature, const Tolerance& tol) {
  check_same_dim(x, y, "mobius_product");
  const double k = curvature.k;
  double ixy = lorentz_inner(x, y);
  double nx = std::fabs(lorentz_inner(x, x));
  double ny = std::fabs(lorentz_inner(y, y));
  double cx = 1.0 + (2.0 / k) * ixy + ny / k;
  double cy = 1.0 - nx / k;
  double den = 1.0 + (2.0 / k) * ixy + nx * ny / (k * k);
  if (std::fabs(den) < tol.eps_norm) {
    throw std::domain_error("mobius_product: degenerate denominator");
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (cx * x[j] + cy * y[j]) / den;
  return out;
}

std::vector<double> project_to_poincare(const LorentzPoint& x) {
  const double sk = x.curvature().sqrt_k();
  std::vector<double> out(x.spatial_dim());
  double denom = x.time() + sk;  // positive: x0 > 0
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = x.coords()[j + 1] / denom;
  return out;
}

LorentzPoint reproject(std::span<const double> ambient, Curvature curvature) {
  if (ambient.size() < 2) {
    throw std::invalid_argument("reproject: need dimension >= 2");
  }
  std::vector<double> out(ambient.begin(), ambient.end());
  double q = spatial_norm2(out);
  out[0] = std::sqrt(curvature.k + q);
  return LorentzPoint::unchecked(std::move(out), curvature);
}

}  // namespace hmamba
