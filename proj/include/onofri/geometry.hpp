#pragma once

// Discretized model geometries (circle, zonal sphere, radial plane), scalar
// fields on them, and the per-node derivative package used everywhere else.
//
// Node coordinates are x in [0, L) on the circle, the colatitude theta on the
// sphere and the radius r on the plane. Sphere fields are Legendre series in
// t = cos(theta). Plane fields are Legendre series in the compactified radial
// variable s = 1 / (1 + (r/a)^2) on [s_R, 1], where a is the stretching length
// and s_R = s(R); R = +infinity (s_R = 0) covers the whole plane.

#include "onofri/spectral.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace onofri {

enum class GeometryKind { Circle, SphereZonal, PlaneRadial };
enum class SphereNormalization { UnitRadius, UnitVolume };

const char* to_string(GeometryKind kind);
const char* to_string(SphereNormalization norm);
GeometryKind parse_geometry_kind(const std::string& text);
SphereNormalization parse_normalization(const std::string& text);

struct GeometryParams {
  double period = 1.0;  // circle length L
  double radius = 1.0;  // sphere radius a (ignored for unit-volume)
  SphereNormalization normalization = SphereNormalization::UnitRadius;
  double truncation = 20.0;  // plane R, may be +infinity
  double stretch = 1.0;      // plane length scale a
  int max_modes = 512;       // plane: cap on retained Legendre modes
};

/// Immutable discretization. Copies share the underlying data.
class Geometry {
 public:
  GeometryKind kind() const { return impl_->kind; }
  int resolution() const { return static_cast<int>(impl_->nodes.size()); }
  const GeometryParams& params() const { return impl_->params; }

  const Eigen::VectorXd& nodes() const { return impl_->nodes; }
  const Eigen::VectorXd& weights() const { return impl_->weights; }
  int dimension() const { return impl_->kind == GeometryKind::Circle ? 1 : 2; }
  double ricci() const { return impl_->ricci; }
  double volume() const { return impl_->volume; }
  /// Sphere radius actually used (1/(2 sqrt(pi)) for unit volume).
  double sphere_radius() const { return impl_->sphere_radius; }
  /// Plane compactified variable s at the nodes; empty for other kinds.
  const Eigen::VectorXd& plane_s() const { return impl_->plane_s; }
  double plane_s_min() const { return impl_->plane_s_min; }

  const spectral::LegendreBasis& legendre() const { return impl_->legendre; }
  const spectral::FourierBasis& fourier() const { return impl_->fourier; }

  /// "kind=... N=... param=..." as written into field files.
  std::string descriptor() const;

  bool same_as(const Geometry& other) const;

  /// Dense Laplace-Beltrami matrix acting on nodal values.
  const Eigen::MatrixXd& laplacian_matrix() const;

  /// Plane only: s <-> r conversions for this geometry's stretch.
  double r_of_s(double s) const;
  double s_of_r(double r) const;

 private:
  struct Impl {
    GeometryKind kind;
    GeometryParams params;
    Eigen::VectorXd nodes, weights, plane_s;
    double ricci = 0, volume = 0, sphere_radius = 1, plane_s_min = 0;
    spectral::LegendreBasis legendre;
    spectral::FourierBasis fourier;
    mutable std::shared_ptr<const Eigen::MatrixXd> laplacian;
  };
  explicit Geometry(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;

  friend Geometry build_geometry(GeometryKind, int, const GeometryParams&);
};

Geometry build_geometry(GeometryKind kind, int resolution, const GeometryParams& params = {});

/// Values of a smooth function on a geometry's nodes plus spectral coefficients.
class ScalarField {
 public:
  ScalarField(Geometry geom, Eigen::VectorXd values);

  static ScalarField from_coeffs(const Geometry& geom, const Eigen::VectorXd& coeffs);
  /// Samples f at node coordinates (x, theta or r).
  static ScalarField sample(const Geometry& geom, const std::function<double(double)>& f);
  static ScalarField constant(const Geometry& geom, double c);

  const Geometry& geometry() const { return geom_; }
  const Eigen::VectorXd& values() const { return values_; }
  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  Eigen::Index size() const { return values_.size(); }

  /// Evaluates the spectral interpolant at an arbitrary coordinate.
  double interpolate(double coordinate) const;

  double tail_fraction() const;

  ScalarField operator+(const ScalarField& o) const;
  ScalarField operator*(double a) const;
  ScalarField shifted(double c) const;

 private:
  Geometry geom_;
  Eigen::VectorXd values_, coeffs_;
};

/// Radial weight data at plane nodes: g = log(mu) and its derivatives.
struct RadialWeightProfile {
  Eigen::VectorXd mu, g, dg, d2g, lap_g;
};

/// Per-node derivative data. All tensors are expressed in the orthonormal
/// frame (e1, e2) with e1 along the gradient direction; for zonal and radial
/// fields the Hessian is diagonal there.
struct DerivativeBundle {
  explicit DerivativeBundle(Geometry g) : geometry(std::move(g)) {}

  Geometry geometry;
  int d = 2;
  Eigen::VectorXd u;
  Eigen::VectorXd grad;     // component of grad u along e1 (signed)
  Eigen::VectorXd grad_sq;  // |grad u|^2
  Eigen::VectorXd lap;      // Laplace-Beltrami of u
  Eigen::VectorXd hess1, hess2;  // Hessian diagonal (hess2 = 0 when d = 1)
  Eigen::VectorXd hess_sq;       // ||H u||^2
  Eigen::VectorXd L_normsq, M_normsq, LM_inner, LhalfM_normsq;
  bool tail_warning = false;

  // Plane only, filled by couple_weight().
  bool has_weight = false;
  Eigen::VectorXd grad_dot_g;     // grad u . grad g
  Eigen::VectorXd grad_dot_g_sq;  // (grad u . grad g)^2
  Eigen::VectorXd grad_g_sq;      // |grad g|^2
  Eigen::VectorXd lap_g;
  Eigen::VectorXd hess_g_uu;      // H g : grad u (x) grad u
  Eigen::VectorXd hess_u_ug;      // H u : grad u (x) grad g
  Eigen::VectorXd LhalfM_ug;      // (L - M/2) : grad u (x) grad g
  Eigen::VectorXd N_normsq;       // ||N u||^2
  Eigen::VectorXd LMN_normsq;     // ||L - M/2 - N||^2
  Eigen::VectorXd omega_g_sq;     // (grad g . omega)^2, 0 where grad u = 0
  Eigen::VectorXd nu;             // exp(-u/2 - g)
};

DerivativeBundle differentiate(const ScalarField& field);

/// Adds the weight-coupled entries to a plane bundle.
void couple_weight(DerivativeBundle& bundle, const RadialWeightProfile& weight);

/// Quadrature of nodal values (dv_g on circle/sphere, dx on the plane).
double integrate(const Geometry& geom, const Eigen::VectorXd& values);
double integrate(const ScalarField& field);

/// Smallest positive eigenvalue of -Laplacian (circle and sphere only).
double first_eigenvalue(const Geometry& geom);

/// Values r d/dr and companions used by the plane code: given nodal values of
/// a radial function, returns (f_r, f_rr, f_r / r).
struct RadialDerivatives {
  Eigen::VectorXd dr, drr, dr_over_r;
};
RadialDerivatives radial_derivatives(const ScalarField& field);

}  // namespace onofri
