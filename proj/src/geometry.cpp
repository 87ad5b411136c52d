#include "onofri/geometry.hpp"

#include "onofri/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

namespace onofri {

using Eigen::VectorXd;
using std::numbers::pi;

const char* to_string(GeometryKind kind) {
  switch (kind) {
    case GeometryKind::Circle: return "circle";
    case GeometryKind::SphereZonal: return "sphere-zonal";
    case GeometryKind::PlaneRadial: return "plane-radial";
  }
  return "?";
}

const char* to_string(SphereNormalization norm) {
  return norm == SphereNormalization::UnitRadius ? "unit-radius" : "unit-volume";
}

GeometryKind parse_geometry_kind(const std::string& text) {
  if (text == "circle") return GeometryKind::Circle;
  if (text == "sphere-zonal" || text == "sphere") return GeometryKind::SphereZonal;
  if (text == "plane-radial" || text == "plane") return GeometryKind::PlaneRadial;
  throw Error(ErrorCode::InvalidParameter, "unknown geometry kind '" + text + "'");
}

SphereNormalization parse_normalization(const std::string& text) {
  if (text == "unit-radius") return SphereNormalization::UnitRadius;
  if (text == "unit-volume") return SphereNormalization::UnitVolume;
  throw Error(ErrorCode::InvalidParameter, "unknown normalization '" + text + "'");
}

Geometry build_geometry(GeometryKind kind, int resolution, const GeometryParams& params) {
  if (resolution < 8) {
    throw Error(ErrorCode::ResolutionTooSmall, "resolution must be >= 8, got " + std::to_string(resolution));
  }
  auto impl = std::make_shared<Geometry::Impl>();
  impl->kind = kind;
  impl->params = params;
  switch (kind) {
    case GeometryKind::Circle: {
      if (!(params.period > 0) || !std::isfinite(params.period)) {
        throw Error(ErrorCode::InvalidParameter, "circle period must be positive");
      }
      if (resolution % 2 != 0) throw Error(ErrorCode::InvalidParameter, "circle resolution must be even");
      impl->fourier = spectral::FourierBasis(params.period, resolution);
      impl->nodes = impl->fourier.points();
      impl->weights = VectorXd::Constant(resolution, params.period / resolution);
      impl->ricci = 0;
      impl->volume = params.period;
      break;
    }
    case GeometryKind::SphereZonal: {
      double a = params.radius;
      if (params.normalization == SphereNormalization::UnitVolume) {
        a = 1.0 / (2.0 * std::sqrt(pi));
      } else if (!(a > 0) || !std::isfinite(a)) {
        throw Error(ErrorCode::InvalidParameter, "sphere radius must be positive");
      }
      impl->params.radius = a;
      impl->sphere_radius = a;
      impl->legendre = spectral::LegendreBasis(-1.0, 1.0, resolution, resolution);
      const VectorXd& t = impl->legendre.points();
      impl->nodes = t.array().acos().matrix();
      impl->weights = 2.0 * pi * a * a * impl->legendre.weights();
      impl->ricci = 1.0 / (a * a);
      impl->volume = 4.0 * pi * a * a;
      break;
    }
    case GeometryKind::PlaneRadial: {
      if (!(params.truncation > 0)) throw Error(ErrorCode::InvalidParameter, "plane truncation radius must be positive");
      if (!(params.stretch > 0) || !std::isfinite(params.stretch)) {
        throw Error(ErrorCode::InvalidParameter, "plane stretch must be positive");
      }
      const double a = params.stretch;
      const double R = params.truncation;
      const double s_min = std::isinf(R) ? 0.0 : 1.0 / (1.0 + (R / a) * (R / a));
      impl->plane_s_min = s_min;
      const int modes = std::min(resolution, std::max(8, params.max_modes));
      impl->legendre = spectral::LegendreBasis(s_min, 1.0, resolution, modes);
      const VectorXd& s = impl->legendre.points();
      impl->plane_s = s;
      impl->nodes = (a * (1.0 / s.array() - 1.0).sqrt()).matrix();
      // dx = 2 pi r dr = pi a^2 ds / s^2
      impl->weights = (pi * a * a * impl->legendre.weights().array() / s.array().square()).matrix();
      impl->ricci = 0;
      impl->volume = pi * R * R;
      break;
    }
  }
  impl->sphere_radius = kind == GeometryKind::SphereZonal ? impl->sphere_radius : 1.0;
  return Geometry(std::move(impl));
}

std::string Geometry::descriptor() const {
  std::ostringstream os;
  os.precision(17);
  os << "kind=" << to_string(kind()) << " N=" << resolution();
  switch (kind()) {
    case GeometryKind::Circle: os << " param=" << params().period; break;
    case GeometryKind::SphereZonal:
      os << " param=" << params().radius << " norm=" << to_string(params().normalization);
      break;
    case GeometryKind::PlaneRadial:
      os << " param=" << params().truncation << " stretch=" << params().stretch
         << " modes=" << legendre().modes();
      break;
  }
  return os.str();
}

bool Geometry::same_as(const Geometry& other) const {
  if (impl_ == other.impl_) return true;
  return descriptor() == other.descriptor();
}

double Geometry::r_of_s(double s) const {
  const double a = params().stretch;
  return a * std::sqrt(1.0 / s - 1.0);
}

double Geometry::s_of_r(double r) const {
  const double a = params().stretch;
  return 1.0 / (1.0 + (r / a) * (r / a));
}

const Eigen::MatrixXd& Geometry::laplacian_matrix() const {
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  if (impl_->laplacian) return *impl_->laplacian;
  Eigen::MatrixXd lap;
  switch (kind()) {
    case GeometryKind::Circle: lap = fourier().derivative_matrix(2); break;
    case GeometryKind::SphereZonal: {
      const double a = sphere_radius();
      const VectorXd& t = legendre().points();
      const Eigen::MatrixXd Dt = legendre().derivative_matrix();
      lap = ((1.0 - t.array().square()).matrix().asDiagonal() * (Dt * Dt) -
             (2.0 * t).asDiagonal() * Dt) /
            (a * a);
      break;
    }
    case GeometryKind::PlaneRadial: {
      const double a = params().stretch;
      const VectorXd& s = plane_s();
      const Eigen::MatrixXd Ds = legendre().derivative_matrix();
      lap = (4.0 * s.array().square() / (a * a)).matrix().asDiagonal() *
            ((s.array() * (1.0 - s.array())).matrix().asDiagonal() * (Ds * Ds) +
             (1.0 - 2.0 * s.array()).matrix().asDiagonal() * Ds);
      break;
    }
  }
  impl_->laplacian = std::make_shared<const Eigen::MatrixXd>(std::move(lap));
  return *impl_->laplacian;
}

// ---------------------------------------------------------------------------

namespace {

VectorXd forward(const Geometry& geom, const VectorXd& values) {
  if (geom.kind() == GeometryKind::Circle) return geom.fourier().to_coeffs(values);
  return geom.legendre().to_coeffs(values);
}

}  // namespace

ScalarField::ScalarField(Geometry geom, VectorXd values) : geom_(std::move(geom)), values_(std::move(values)) {
  if (values_.size() != geom_.resolution()) {
    throw Error(ErrorCode::GeometryMismatch, "field size does not match geometry resolution");
  }
  coeffs_ = forward(geom_, values_);
}

ScalarField ScalarField::from_coeffs(const Geometry& geom, const VectorXd& coeffs) {
  VectorXd values = geom.kind() == GeometryKind::Circle ? geom.fourier().to_values(coeffs)
                                                        : geom.legendre().to_values(coeffs);
  return ScalarField(geom, std::move(values));
}

ScalarField ScalarField::sample(const Geometry& geom, const std::function<double(double)>& f) {
  VectorXd v(geom.resolution());
  for (int j = 0; j < geom.resolution(); ++j) v(j) = f(geom.nodes()(j));
  return ScalarField(geom, std::move(v));
}

ScalarField ScalarField::constant(const Geometry& geom, double c) {
  return ScalarField(geom, VectorXd::Constant(geom.resolution(), c));
}

double ScalarField::interpolate(double coordinate) const {
  switch (geom_.kind()) {
    case GeometryKind::Circle: {
      const int n = geom_.resolution();
      const double w = 2.0 * pi / geom_.params().period;
      double sum = coeffs_(0);
      for (int k = 1; k < n / 2; ++k) {
        sum += coeffs_(2 * k - 1) * std::cos(w * k * coordinate) + coeffs_(2 * k) * std::sin(w * k * coordinate);
      }
      sum += coeffs_(n - 1) * std::cos(w * (n / 2) * coordinate);
      return sum;
    }
    case GeometryKind::SphereZonal: return geom_.legendre().evaluate(coeffs_, std::cos(coordinate));
    case GeometryKind::PlaneRadial: return geom_.legendre().evaluate(coeffs_, geom_.s_of_r(coordinate));
  }
  return 0;
}

double ScalarField::tail_fraction() const {
  if (geom_.kind() == GeometryKind::Circle) return geom_.fourier().tail_fraction(coeffs_);
  return geom_.legendre().tail_fraction(coeffs_);
}

ScalarField ScalarField::operator+(const ScalarField& o) const {
  if (!geom_.same_as(o.geom_)) throw Error(ErrorCode::GeometryMismatch, "adding fields on different geometries");
  return ScalarField(geom_, values_ + o.values_);
}

ScalarField ScalarField::operator*(double a) const { return ScalarField(geom_, values_ * a); }

ScalarField ScalarField::shifted(double c) const {
  return ScalarField(geom_, (values_.array() + c).matrix());
}

// ---------------------------------------------------------------------------

namespace {

// Legendre coefficients of u - c with c the midrange of u. Derivatives ignore
// the constant, and removing it first keeps its roundoff out of the high modes,
// which coefficient-space differentiation would amplify by about P^4.
VectorXd centered_coeffs(const ScalarField& field) {
  const VectorXd& v = field.values();
  const double c = 0.5 * (v.maxCoeff() + v.minCoeff());
  return field.geometry().legendre().to_coeffs((v.array() - c).matrix());
}

}  // namespace

RadialDerivatives radial_derivatives(const ScalarField& field) {
  const Geometry& geom = field.geometry();
  if (geom.kind() != GeometryKind::PlaneRadial) {
    throw Error(ErrorCode::UnsupportedGeometry, "radial derivatives need a plane geometry");
  }
  const auto& basis = geom.legendre();
  const double a = geom.params().stretch;
  const VectorXd& s = geom.plane_s();
  const VectorXd& r = geom.nodes();
  const VectorXd c1 = basis.derivative(centered_coeffs(field));
  const VectorXd c2 = basis.derivative(c1);
  const VectorXd us = basis.to_values(c1);
  const VectorXd uss = basis.to_values(c2);
  RadialDerivatives out;
  const auto s2 = s.array().square();
  out.dr = (-2.0 * r.array() * s2 / (a * a) * us.array()).matrix();
  out.dr_over_r = (-2.0 * s2 / (a * a) * us.array()).matrix();
  const VectorXd lap =
      (4.0 * s2 / (a * a) * (s.array() * (1.0 - s.array()) * uss.array() + (1.0 - 2.0 * s.array()) * us.array()))
          .matrix();
  out.drr = lap - out.dr_over_r;
  return out;
}

DerivativeBundle differentiate(const ScalarField& field) {
  const Geometry& geom = field.geometry();
  DerivativeBundle b(geom);
  b.d = geom.dimension();
  b.u = field.values();
  b.tail_warning = field.tail_fraction() > 1e-8;
  const Eigen::Index n = field.size();

  switch (geom.kind()) {
    case GeometryKind::Circle: {
      b.grad = geom.fourier().derivative(field.values(), 1);
      b.hess1 = geom.fourier().derivative(field.values(), 2);
      b.hess2 = VectorXd::Zero(n);
      break;
    }
    case GeometryKind::SphereZonal: {
      const auto& basis = geom.legendre();
      const double a = geom.sphere_radius();
      const VectorXd& t = basis.points();
      const VectorXd c1 = basis.derivative(centered_coeffs(field));
      const VectorXd c2 = basis.derivative(c1);
      const VectorXd ut = basis.to_values(c1);
      const VectorXd utt = basis.to_values(c2);
      const auto sin_theta = (1.0 - t.array().square()).sqrt();
      b.grad = (-sin_theta * ut.array() / a).matrix();
      b.hess1 = (((1.0 - t.array().square()) * utt.array() - t.array() * ut.array()) / (a * a)).matrix();
      // cot(theta) u_theta = -t u_t, regular at the poles
      b.hess2 = (-t.array() * ut.array() / (a * a)).matrix();
      break;
    }
    case GeometryKind::PlaneRadial: {
      const RadialDerivatives rd = radial_derivatives(field);
      b.grad = rd.dr;
      b.hess1 = rd.drr;
      b.hess2 = rd.dr_over_r;
      break;
    }
  }

  b.grad_sq = b.grad.array().square().matrix();
  b.lap = b.hess1 + b.hess2;
  b.hess_sq = (b.hess1.array().square() + b.hess2.array().square()).matrix();
  if (b.d == 1) {
    b.L_normsq = VectorXd::Zero(n);
    b.M_normsq = VectorXd::Zero(n);
    b.LM_inner = VectorXd::Zero(n);
    b.LhalfM_normsq = VectorXd::Zero(n);
  } else {
    // L = diag(alpha, -alpha), M = diag(beta, -beta) in the gradient frame
    const auto alpha = 0.5 * (b.hess1 - b.hess2).array();
    const auto beta = 0.5 * b.grad_sq.array();
    b.L_normsq = (2.0 * alpha.square()).matrix();
    b.M_normsq = (2.0 * beta.square()).matrix();
    b.LM_inner = (2.0 * alpha * beta).matrix();
    b.LhalfM_normsq = (2.0 * (alpha - 0.5 * beta).square()).matrix();
  }
  return b;
}

void couple_weight(DerivativeBundle& b, const RadialWeightProfile& w) {
  if (b.geometry.kind() != GeometryKind::PlaneRadial) {
    throw Error(ErrorCode::UnsupportedGeometry, "weight coupling needs a plane geometry");
  }
  if (w.dg.size() != b.u.size()) throw Error(ErrorCode::GeometryMismatch, "weight profile size mismatch");
  const auto ur = b.grad.array();
  const auto gr = w.dg.array();
  b.has_weight = true;
  b.grad_dot_g = (ur * gr).matrix();
  b.grad_dot_g_sq = b.grad_dot_g.array().square().matrix();
  b.grad_g_sq = gr.square().matrix();
  b.lap_g = w.lap_g;
  b.hess_g_uu = (w.d2g.array() * ur.square()).matrix();
  b.hess_u_ug = (b.hess1.array() * ur * gr).matrix();
  const auto alpha = 0.5 * (b.hess1 - b.hess2).array();
  const auto beta = 0.5 * b.grad_sq.array();
  const auto gamma = 0.5 * ur * gr;  // N = diag(gamma, -gamma)
  b.LhalfM_ug = ((alpha - 0.5 * beta) * ur * gr).matrix();
  b.N_normsq = (2.0 * gamma.square()).matrix();
  b.LMN_normsq = (2.0 * (alpha - 0.5 * beta - gamma).square()).matrix();
  b.omega_g_sq = (ur != 0.0).select(gr.square(), 0.0).matrix();
  b.nu = (-0.5 * b.u.array() - w.g.array()).exp().matrix();
}

double integrate(const Geometry& geom, const VectorXd& values) {
  if (values.size() != geom.resolution()) throw Error(ErrorCode::GeometryMismatch, "integrand size mismatch");
  return geom.weights().dot(values);
}

double integrate(const ScalarField& field) { return integrate(field.geometry(), field.values()); }

double first_eigenvalue(const Geometry& geom) {
  if (geom.kind() == GeometryKind::PlaneRadial) {
    throw Error(ErrorCode::UnsupportedGeometry, "first_eigenvalue is defined on the circle and the sphere");
  }
  // Self-adjoint in the quadrature inner product: symmetrize with W^{1/2}.
  const VectorXd sw = geom.weights().array().sqrt().matrix();
  const VectorXd isw = sw.cwiseInverse();
  Eigen::MatrixXd S = -(sw.asDiagonal() * geom.laplacian_matrix() * isw.asDiagonal());
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const VectorXd& ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > 1e-10 * scale) return ev(i);
  }
  throw Error(ErrorCode::NotConverged, "no positive eigenvalue found");
}

}  // namespace onofri
