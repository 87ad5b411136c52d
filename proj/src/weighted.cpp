#include "onofri/weighted.hpp"

#include "onofri/error.hpp"
#include "onofri/format.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace onofri {

using Eigen::VectorXd;
using std::numbers::pi;

const char* to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::Stereographic: return "stereographic";
    case WeightKind::Gaussian: return "gaussian";
    case WeightKind::Perturbed: return "perturbed";
    case WeightKind::KellerSegel: return "keller-segel";
    case WeightKind::KsSelfSimilar: return "ks-selfsim";
  }
  return "?";
}

namespace {

std::string num(double v) {
  return format_double(v);
}

double parse_num(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ParseError, "bad number '" + s + "' in weight spec");
}

void require_plane(const Geometry& g) {
  if (g.kind() != GeometryKind::PlaneRadial) throw Error(ErrorCode::UnsupportedGeometry, "weights live on the plane");
}

void check_mass(double m) {
  if (!(m > 0 && m < 8 * pi)) {
    throw Error(ErrorCode::MassOutOfRange, "Keller-Segel mass must lie in (0, 8 pi), got " + num(m));
  }
}

double log_integral_exp(const Geometry& geom, const VectorXd& u, const VectorXd& mu) {
  const double m = u.maxCoeff();
  return m + std::log(integrate(geom, ((u.array() - m).exp() * mu.array()).matrix()));
}

}  // namespace

std::string WeightSpec::text() const {
  switch (kind) {
    case WeightKind::Stereographic: return "stereographic";
    case WeightKind::Gaussian: return "gaussian:" + num(sigma);
    case WeightKind::Perturbed: return "perturbed:" + num(amplitude);
    case WeightKind::KellerSegel: return "keller-segel:" + num(mass);
    case WeightKind::KsSelfSimilar: return "ks-selfsim:" + num(mass) + ":" + num(epsilon);
  }
  return "?";
}

WeightSpec parse_weight_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty()) throw Error(ErrorCode::ParseError, "empty weight spec");
  WeightSpec w;
  const std::string& k = parts[0];
  auto want = [&](std::size_t n) {
    if (parts.size() != n) throw Error(ErrorCode::ParseError, "wrong number of fields in weight spec '" + text + "'");
  };
  if (k == "stereographic") {
    want(1);
    w.kind = WeightKind::Stereographic;
  } else if (k == "gaussian") {
    if (parts.size() == 1) parts.push_back("1");
    want(2);
    w.kind = WeightKind::Gaussian;
    w.sigma = parse_num(parts[1]);
    if (!(w.sigma > 0)) throw Error(ErrorCode::InvalidParameter, "gaussian sigma must be positive");
  } else if (k == "perturbed") {
    want(2);
    w.kind = WeightKind::Perturbed;
    w.amplitude = parse_num(parts[1]);
  } else if (k == "keller-segel") {
    want(2);
    w.kind = WeightKind::KellerSegel;
    w.mass = parse_num(parts[1]);
    check_mass(w.mass);
  } else if (k == "ks-selfsim") {
    want(3);
    w.kind = WeightKind::KsSelfSimilar;
    w.mass = parse_num(parts[1]);
    w.epsilon = parse_num(parts[2]);
    check_mass(w.mass);
    if (!(w.epsilon >= 0)) throw Error(ErrorCode::InvalidParameter, "self-similar epsilon must be >= 0");
  } else {
    throw Error(ErrorCode::InvalidParameter, "unknown weight kind '" + k + "'");
  }
  return w;
}

// ---------------------------------------------------------------------------
// Closed-form weights

namespace {

void finish_profile(Weight& w) {
  const Geometry& geom = w.geometry;
  if (!(w.profile.mu.array() > 0).all() || !w.profile.mu.allFinite()) {
    throw Error(ErrorCode::NormalizationFailure, "weight density is not positive at every node");
  }
  w.normalization_defect = std::abs(integrate(geom, w.profile.mu) - w.expected_mass);
  if (w.normalization_defect > 1e-4) {
    throw Error(ErrorCode::NormalizationFailure, "weight normalization defect " + num(w.normalization_defect));
  }
}

Weight stereographic(const WeightSpec& spec, const Geometry& geom) {
  Weight w(spec, geom);
  const VectorXd& r = geom.nodes();
  const auto q = 1.0 + r.array().square();
  w.profile.mu = (1.0 / (pi * q.square())).matrix();
  w.profile.g = (-std::log(pi) - 2.0 * q.log()).matrix();
  w.profile.dg = (-4.0 * r.array() / q).matrix();
  w.profile.d2g = (-4.0 * (1.0 - r.array().square()) / q.square()).matrix();
  w.profile.lap_g = (-8.0 / q.square()).matrix();
  const double R = geom.params().truncation;
  w.expected_mass = std::isinf(R) ? 1.0 : R * R / (1 + R * R);
  w.ratio_origin = 1.0;  // 8 / (8 pi mu (1+r^2)^2) = 1 everywhere
  w.ratio_outer = 1.0;
  finish_profile(w);
  return w;
}

Weight gaussian(const WeightSpec& spec, const Geometry& geom) {
  Weight w(spec, geom);
  const double s2 = spec.sigma * spec.sigma;
  const VectorXd& r = geom.nodes();
  w.profile.mu = ((-r.array().square() / (2 * s2)).exp() / (2 * pi * s2)).matrix();
  w.profile.g = (-r.array().square() / (2 * s2) - std::log(2 * pi * s2)).matrix();
  w.profile.dg = (-r.array() / s2).matrix();
  w.profile.d2g = VectorXd::Constant(r.size(), -1 / s2);
  w.profile.lap_g = VectorXd::Constant(r.size(), -2 / s2);
  const double R = geom.params().truncation;
  w.expected_mass = std::isinf(R) ? 1.0 : -std::expm1(-R * R / (2 * s2));
  // ratio(r) = exp(r^2 / (2 sigma^2)) / 2
  w.ratio_origin = 0.5;
  w.ratio_outer = std::isinf(R) ? std::numeric_limits<double>::infinity() : 0.5 * std::exp(R * R / (2 * s2));
  finish_profile(w);
  return w;
}

// (1+r^2)^2 Lap h in terms of s, regular on [0, 1].
double weighted_lap_at(const Geometry& geom, const VectorXd& h1, const VectorXd& h2, double s) {
  const double a = geom.params().stretch;
  const double hs = geom.legendre().evaluate(h1, s);
  const double hss = geom.legendre().evaluate(h2, s);
  const double f = s + a * a * (1 - s);
  return 4.0 / (a * a) * f * f * (s * (1 - s) * hss + (1 - 2 * s) * hs);
}

Weight perturbed(const WeightSpec& spec, const ScalarField& h, double Z, double expected_mass) {
  const Geometry& geom = h.geometry();
  Weight w(spec, geom);
  const VectorXd& r = geom.nodes();
  const auto q = 1.0 + r.array().square();
  const RadialDerivatives hd = radial_derivatives(h);
  const VectorXd lap_h = hd.drr + hd.dr_over_r;
  w.profile.mu = ((-h.values().array()).exp() / (Z * q.square())).matrix();
  w.profile.g = (-h.values().array() - std::log(Z) - 2.0 * q.log()).matrix();
  w.profile.dg = (-hd.dr.array() - 4.0 * r.array() / q).matrix();
  w.profile.d2g = (-hd.drr.array() - 4.0 * (1.0 - r.array().square()) / q.square()).matrix();
  w.profile.lap_g = (-lap_h.array() - 8.0 / q.square()).matrix();
  w.expected_mass = expected_mass;
  const VectorXd h1 = geom.legendre().derivative(h.coeffs());
  const VectorXd h2 = geom.legendre().derivative(h1);
  auto ratio_at = [&](double s) {
    const double hv = geom.legendre().evaluate(h.coeffs(), s);
    return Z * std::exp(hv) * (weighted_lap_at(geom, h1, h2, s) + 8) / (8 * pi);
  };
  w.ratio_origin = ratio_at(1.0);
  w.ratio_outer = ratio_at(geom.plane_s_min());
  finish_profile(w);
  return w;
}

}  // namespace

Weight make_perturbed_weight(const ScalarField& h) {
  require_plane(h.geometry());
  const Geometry& geom = h.geometry();
  const auto q = 1.0 + geom.nodes().array().square();
  const double inside = integrate(geom, ((-h.values().array()).exp() / q.square()).matrix());
  // Outside a finite radius h is continued by its edge value, so the weight is
  // normalized on the whole plane like the closed-form kinds.
  const double R = geom.params().truncation;
  const double outside =
      std::isinf(R) ? 0.0 : pi * std::exp(-geom.legendre().evaluate(h.coeffs(), geom.plane_s_min())) / (1 + R * R);
  WeightSpec spec;
  spec.kind = WeightKind::Perturbed;
  spec.amplitude = std::numeric_limits<double>::quiet_NaN();
  return perturbed(spec, h, inside + outside, inside / (inside + outside));
}

Weight make_weight(const WeightSpec& spec, const Geometry& geom, const KellerSegelConfig& ks) {
  require_plane(geom);
  switch (spec.kind) {
    case WeightKind::Stereographic: return stereographic(spec, geom);
    case WeightKind::Gaussian: return gaussian(spec, geom);
    case WeightKind::Perturbed: {
      const double A = spec.amplitude;
      const ScalarField h = ScalarField::sample(geom, [A](double r) { return A / (1 + r * r); });
      // Z = pi (1 - e^{-A}) / A; the mass inside R is int_{s_R}^1 e^{-A s} ds / int_0^1 e^{-A s} ds
      const double Z = A == 0 ? pi : pi * (-std::expm1(-A)) / A;
      const double R = geom.params().truncation;
      const double sR = std::isinf(R) ? 0.0 : 1.0 / (1.0 + R * R);
      double mass = 1.0;
      if (sR > 0) mass = A == 0 ? 1 - sR : (std::exp(-A * sR) - std::exp(-A)) / (-std::expm1(-A));
      return perturbed(spec, h, Z, mass);
    }
    case WeightKind::KellerSegel:
    case WeightKind::KsSelfSimilar: {
      Weight w = solve_keller_segel(spec.mass, spec.kind == WeightKind::KsSelfSimilar ? spec.epsilon : 0.0, geom, ks);
      w.spec = spec;
      return w;
    }
  }
  throw Error(ErrorCode::InvalidParameter, "unknown weight kind");
}

VectorXd weight_ratio(const Weight& w) {
  return (-w.profile.lap_g.array() / (8 * pi * w.profile.mu.array())).matrix();
}

LambdaStarWeight lambda_star_weight(const Weight& w) {
  const VectorXd ratio = weight_ratio(w);
  Eigen::Index j = 0;
  LambdaStarWeight out;
  out.value = ratio.minCoeff(&j);
  out.inf_location_r = w.geometry.nodes()(j);
  if (w.ratio_origin <= out.value) {
    out.value = w.ratio_origin;
    out.inf_location_r = 0;
  }
  if (w.ratio_outer < out.value) {
    out.value = w.ratio_outer;
    out.inf_location_r = w.geometry.params().truncation;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Keller-Segel

namespace {

void require_ks(const Weight& w) {
  if (w.spec.kind != WeightKind::KellerSegel && w.spec.kind != WeightKind::KsSelfSimilar) {
    throw Error(ErrorCode::InvalidParameter, "not a Keller-Segel weight");
  }
}

}  // namespace

double ks_recovered_mass(const Weight& w) {
  require_ks(w);
  const auto& basis = w.geometry.legendre();
  const double flux = basis.evaluate(basis.to_coeffs(w.r_dc), w.geometry.plane_s_min());
  return -2 * pi * flux - w.spec.epsilon * integrate(w.geometry, w.r_dc);
}

double ks_decomposition_defect(const Weight& w) {
  require_ks(w);
  const VectorXd extra =
      ((w.spec.epsilon * w.r_dc.array() + 2) / (8 * pi * w.profile.mu.array())).matrix();
  const VectorXd ratio = weight_ratio(w);
  // Both sides grow like 1/mu, so the defect is scaled by the ratio itself.
  return ((ratio - extra).array() - w.spec.mass / (8 * pi)).abs().cwiseQuotient(ratio.array().abs().max(1.0)).maxCoeff();
}

Weight solve_keller_segel(double mass, double epsilon, const Geometry& geom, const KellerSegelConfig& cfg) {
  require_plane(geom);
  check_mass(mass);
  if (!(epsilon >= 0)) throw Error(ErrorCode::InvalidParameter, "self-similar epsilon must be >= 0");
  if (std::isinf(geom.params().truncation)) {
    throw Error(ErrorCode::InvalidParameter, "Keller-Segel profiles need a finite truncation radius");
  }
  const auto& basis = geom.legendre();
  const double a = geom.params().stretch;
  const VectorXd& s = geom.plane_s();
  const VectorXd& r = geom.nodes();
  const VectorXd r2 = r.array().square().matrix();
  const VectorXd drift = (0.5 * epsilon * r2.array()).exp().matrix();  // e^{eps r^2 / 2}

  struct Sweep {
    VectorXd n, r_dc, c_new;
    double Z;
  };
  // One Picard map: c -> n(c) -> solution of the radial equation with c(R) = 0.
  auto sweep = [&](const VectorXd& c) {
    Sweep out;
    const VectorXd e = (c.array() - 0.5 * r2.array()).exp().matrix();
    out.Z = integrate(geom, e);
    out.n = mass * e / out.Z;
    // J(s) = int_0^r rho n e^{eps rho^2/2} d rho = (a^2/2) int_s^1 (n e^{...}) / s'^2 ds'
    const VectorXd f = (out.n.array() * drift.array() / s.array().square()).matrix();
    const VectorXd F = basis.antiderivative(basis.to_coeffs(f));
    const double F1 = spectral::legendre_eval(F, 1.0);
    const VectorXd J = (0.5 * a * a * (F1 - basis.evaluate_at_nodes(F).array())).matrix();
    out.r_dc = (-J.array() / drift.array()).matrix();
    // dc/ds = e^{-eps r^2/2} J / (2 s (1 - s))
    const VectorXd dcds = (J.array() / drift.array() / (2 * s.array() * (1 - s.array()))).matrix();
    const VectorXd C = basis.antiderivative(basis.to_coeffs(dcds));
    out.c_new = basis.evaluate_at_nodes(C);
    return out;
  };

  VectorXd c = VectorXd::Zero(geom.resolution());
  Weight w(WeightSpec{}, geom);
  w.spec.kind = epsilon > 0 ? WeightKind::KsSelfSimilar : WeightKind::KellerSegel;
  w.spec.mass = mass;
  w.spec.epsilon = epsilon;
  bool converged = false;
  Sweep sw;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    sw = sweep(c);
    const VectorXd step = cfg.damping * (sw.c_new - c);
    c += step;
    const double update = step.cwiseAbs().maxCoeff();
    w.update_history.push_back(update);
    w.iterations = it + 1;
    if (!std::isfinite(update)) break;
    if (update <= cfg.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::NotConverged, "Keller-Segel fixed point did not converge in " +
                                             std::to_string(w.iterations) + " iterations");
  }
  sw = sweep(c);
  w.c = c;
  w.r_dc = sw.r_dc;
  const ScalarField cf(geom, c);
  const DerivativeBundle cb = differentiate(cf);
  w.profile.mu = sw.n / mass;
  w.profile.g = (c.array() - 0.5 * r2.array() - std::log(sw.Z)).matrix();
  w.profile.dg = (sw.r_dc.array() / r.array() - r.array()).matrix();
  w.profile.lap_g = (cb.lap.array() - 2.0).matrix();
  w.profile.d2g = w.profile.lap_g - (sw.r_dc.array() / r2.array() - 1.0).matrix();
  w.expected_mass = 1.0;

  // Ratio at the ends of the radial interval from the spectral interpolants.
  const VectorXd lapc_coeffs = basis.to_coeffs(cb.lap);
  auto ratio_at = [&](double sv) {
    const double mu = std::exp(basis.evaluate(cf.coeffs(), sv) - 0.5 * std::pow(geom.r_of_s(sv), 2)) / sw.Z;
    return -(basis.evaluate(lapc_coeffs, sv) - 2.0) / (8 * pi * mu);
  };
  w.ratio_origin = ratio_at(1.0);
  w.ratio_outer = ratio_at(geom.plane_s_min());
  finish_profile(w);
  return w;
}

// ---------------------------------------------------------------------------

double perturbation_bound_value(double variation, double inf_weighted_lap) {
  return std::exp(-variation) * (1 + inf_weighted_lap / 8);
}

PerturbationBound perturbation_bound(const ScalarField& h) {
  const Geometry& geom = h.geometry();
  require_plane(geom);
  const auto& basis = geom.legendre();
  const VectorXd h1 = basis.derivative(h.coeffs());
  const VectorXd h2 = basis.derivative(h1);
  const double s_lo = geom.plane_s_min();
  // sup and inf over the nodes and both ends of the radial interval
  double hmax = h.values().maxCoeff(), hmin = h.values().minCoeff();
  double lap_inf = std::numeric_limits<double>::infinity();
  for (double sv : {s_lo, 1.0}) {
    const double v = basis.evaluate(h.coeffs(), sv);
    hmax = std::max(hmax, v);
    hmin = std::min(hmin, v);
    lap_inf = std::min(lap_inf, weighted_lap_at(geom, h1, h2, sv));
  }
  for (int j = 0; j < geom.resolution(); ++j) {
    lap_inf = std::min(lap_inf, weighted_lap_at(geom, h1, h2, geom.plane_s()(j)));
  }
  PerturbationBound out;
  out.variation = hmax - hmin;
  if (!std::isfinite(out.variation) || out.variation > 700) {
    throw Error(ErrorCode::UnboundedVariation, "variation of h is not bounded on the grid");
  }
  out.inf_weighted_lap = lap_inf;
  out.bound = perturbation_bound_value(out.variation, lap_inf);
  out.lambda_star = lambda_star_weight(make_perturbed_weight(h)).value;
  out.consistent = out.bound <= out.lambda_star + 1e-8;
  return out;
}

// ---------------------------------------------------------------------------
// Euler-Lagrange equation

VectorXd weighted_el_residual(const Weight& w, const ScalarField& u, double lambda) {
  const DerivativeBundle b = differentiate(u);
  return (-b.lap.array() / (8 * pi) + lambda * w.profile.mu.array() * (1.0 - u.values().array().exp())).matrix();
}

namespace {

bool gradient_vanishes(const VectorXd& grad_sq, const VectorXd& u) {
  const double scale = 1 + u.cwiseAbs().maxCoeff();
  return grad_sq.maxCoeff() <= 1e-26 * scale * scale;
}

}  // namespace

BranchPoint solve_el_weighted(double lambda, const Weight& w, const ScalarField& init, const NewtonConfig& cfg) {
  if (!(lambda > 0)) throw Error(ErrorCode::InvalidParameter, "lambda must be positive");
  const Geometry& geom = w.geometry;
  if (!init.geometry().same_as(geom)) throw Error(ErrorCode::GeometryMismatch, "initial field on another geometry");
  const Eigen::MatrixXd& lap = geom.laplacian_matrix();
  const VectorXd& mu = w.profile.mu;
  auto normalize = [&](VectorXd u) {
    const double shift = log_integral_exp(geom, u, mu) - std::log(w.expected_mass);
    return VectorXd(u.array() - shift);
  };
  VectorXd u = normalize(init.values());
  auto res_norm = [&](const VectorXd& v) {
    return weighted_el_residual(w, ScalarField(geom, v), lambda).cwiseAbs().maxCoeff();
  };
  // Line-search merit: L2 norm against the weight, which decays with r like
  // the residual terms it balances.
  auto merit = [&](const VectorXd& v) {
    const VectorXd r = weighted_el_residual(w, ScalarField(geom, v), lambda);
    return std::sqrt(integrate(geom, (r.array().square() / mu.array()).matrix()));
  };
  BranchPoint bp(lambda, ScalarField(geom, u));
  double rn = res_norm(u), m = merit(u);
  bp.residual_history.push_back(rn);
  int it = 0;
  const VectorXd& qw = geom.weights();
  while (rn > cfg.tol && it < cfg.max_iterations) {
    ++it;
    const VectorXd res = weighted_el_residual(w, ScalarField(geom, u), lambda);
    // Jacobian of the shift invariant form -Lap u / 8pi + lambda mu - lambda M e^u mu / int e^u mu
    // at a normalized iterate; constants span its kernel and the shift fixes that gauge.
    const VectorXd eu_mu = (u.array().exp() * mu.array()).matrix();
    Eigen::MatrixXd J = -lap / (8 * pi);
    J.diagonal() -= lambda * eu_mu;
    J += (lambda / w.expected_mass) * eu_mu * eu_mu.cwiseProduct(qw).transpose();
    const VectorXd du = J.completeOrthogonalDecomposition().solve(-res);
    double t = 1;
    bool accepted = false;
    for (int k = 0; k <= cfg.max_halvings; ++k, t *= 0.5) {
      const VectorXd trial = normalize(u + t * du);
      const double tm = merit(trial);
      if (std::isfinite(tm) && tm < m) {
        u = trial;
        m = tm;
        rn = res_norm(u);
        accepted = true;
        break;
      }
    }
    bp.residual_history.push_back(rn);
    if (!accepted) break;
  }
  if (!(rn <= cfg.tol)) {
    throw Error(ErrorCode::NewtonDiverged, "weighted Euler-Lagrange Newton stalled at residual " + num(rn));
  }
  bp.solution = ScalarField(geom, u);
  bp.iterations = it;
  bp.newton_residual = rn;
  const double mean = integrate(geom, (u.array() * mu.array()).matrix()) / w.expected_mass;
  bp.distance_to_constant = (u.array() - mean).abs().maxCoeff();
  bp.branch_tag = bp.distance_to_constant <= kConstantBranchThreshold ? BranchTag::Constant : BranchTag::Nonconstant;
  return bp;
}

ScalarField dilation_field(const Geometry& geom, double sigma) {
  require_plane(geom);
  return ScalarField::sample(geom, [sigma](double r) {
    return 2 * std::log(sigma) + 2 * std::log1p(r * r) - 2 * std::log1p(sigma * sigma * r * r);
  });
}

double capital_lambda_quotient(const Weight& w, const ScalarField& u) {
  if (!u.geometry().same_as(w.geometry)) throw Error(ErrorCode::GeometryMismatch, "field and weight differ");
  DerivativeBundle b = differentiate(u);
  if (gradient_vanishes(b.grad_sq, b.u)) throw Error(ErrorCode::ConstantField, "grad u vanishes");
  couple_weight(b, w.profile);
  const auto q = b.grad_sq.array();
  const double num = integrate(w.geometry, ((b.grad_dot_g_sq.array() - (b.lap_g.array() + b.grad_g_sq.array()) * q) *
                                            b.nu.array()).matrix());
  const double den = integrate(w.geometry, (q * (-0.5 * b.u.array()).exp()).matrix());
  return num / (8 * pi * den);
}

double onofri_deficit_weighted(const Weight& w, const ScalarField& u, double lambda) {
  if (!u.geometry().same_as(w.geometry)) throw Error(ErrorCode::GeometryMismatch, "field and weight differ");
  const DerivativeBundle b = differentiate(u);
  const Geometry& g = w.geometry;
  const double dirichlet = integrate(g, b.grad_sq) / (16 * pi);
  const double mass = integrate(g, w.profile.mu);
  const double mean = integrate(g, (u.values().array() * w.profile.mu.array()).matrix()) / mass;
  const double logexp = log_integral_exp(g, u.values(), w.profile.mu) - std::log(mass);
  return dirichlet - lambda * (logexp - mean);
}

void write_weight_profile_csv(std::ostream& os, const Weight& w) {
  os << "r,mu,g,dg,lap_g\n";
  for (int j = 0; j < w.geometry.resolution(); ++j) {
    os << num(w.geometry.nodes()(j)) << "," << num(w.profile.mu(j)) << "," << num(w.profile.g(j)) << ","
       << num(w.profile.dg(j)) << "," << num(w.profile.lap_g(j)) << "\n";
  }
}

}  // namespace onofri
