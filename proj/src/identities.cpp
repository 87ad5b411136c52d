#include "onofri/identities.hpp"

#include "onofri/error.hpp"
#include "onofri/format.hpp"
#include "onofri/weighted.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>
#include <mutex>
#include <thread>

namespace onofri {

using Eigen::ArrayXd;
using Eigen::VectorXd;
using std::numbers::pi;

namespace {

constexpr unsigned kCircle = 1u << static_cast<int>(GeometryKind::Circle);
constexpr unsigned kSphere = 1u << static_cast<int>(GeometryKind::SphereZonal);
constexpr unsigned kPlane = 1u << static_cast<int>(GeometryKind::PlaneRadial);

}  // namespace

const std::vector<IdentityInfo>& identity_registry() {
  using N = IdentityNorm;
  static const std::vector<IdentityInfo> reg = {
      {IdentityId::AlgHessianSplit, "ALG_HESSIAN_SPLIT", kCircle | kSphere, false, false, N::PointwiseSup},
      {IdentityId::AlgMNorm, "ALG_M_NORM", kCircle | kSphere, false, false, N::PointwiseSup},
      {IdentityId::SphereBlwPointwise, "SPHERE_BLW_POINTWISE", kSphere, false, false, N::PointwiseSup},
      {IdentityId::SphereIbp, "SPHERE_IBP", kSphere, false, false, N::Integral},
      {IdentityId::SphereBlwIntegral, "SPHERE_BLW_INTEGRAL", kSphere, false, false, N::Integral},
      {IdentityId::PoincareSlack, "POINCARE_SLACK", kSphere, false, true, N::Integral},
      {IdentityId::CircleIntparts, "CIRCLE_INTPARTS", kCircle, false, false, N::Integral},
      {IdentityId::CircleElIdentity, "CIRCLE_EL_IDENTITY", kCircle, true, false, N::Integral},
      {IdentityId::CircleSpectral, "CIRCLE_SPECTRAL", kCircle, false, true, N::Integral},
      {IdentityId::PlaneElim1, "PLANE_ELIM1", kPlane, false, false, N::Integral},
      {IdentityId::PlaneElim2, "PLANE_ELIM2", kPlane, false, false, N::Integral},
      {IdentityId::PlaneElim3, "PLANE_ELIM3", kPlane, false, false, N::Integral},
      {IdentityId::PlaneAbc, "PLANE_ABC", kPlane, false, false, N::MultiL2},
      {IdentityId::PlaneDE, "PLANE_D_E", kPlane, false, false, N::PointwiseSup},
      {IdentityId::PlaneIpp1, "PLANE_IPP1", kPlane, false, false, N::Integral},
      {IdentityId::PlaneIpp2, "PLANE_IPP2", kPlane, false, false, N::Integral},
      {IdentityId::PlaneDeltau2, "PLANE_DELTAU2", kPlane, false, false, N::Integral},
      {IdentityId::PlaneIZero, "PLANE_I_ZERO", kPlane, true, false, N::Integral},
      {IdentityId::PlaneFinal, "PLANE_FINAL", kPlane, true, false, N::Integral},
  };
  return reg;
}

const IdentityInfo& identity_info(IdentityId id) {
  for (const auto& info : identity_registry()) {
    if (info.id == id) return info;
  }
  throw Error(ErrorCode::InvalidParameter, "unregistered identity");
}

IdentityId parse_identity_id(const std::string& name) {
  for (const auto& info : identity_registry()) {
    if (name == info.name) return info.id;
  }
  throw Error(ErrorCode::InvalidParameter, "unknown identity '" + name + "'");
}

bool identity_applies(IdentityId id, GeometryKind kind) {
  return (identity_info(id).geometries & (1u << static_cast<int>(kind))) != 0;
}

namespace {

struct Sides {
  VectorXd lhs, rhs;
  double tail = 0;
};

Sides scalar(double l, double r) {
  Sides s;
  s.lhs = VectorXd::Constant(1, l);
  s.rhs = VectorXd::Constant(1, r);
  return s;
}

// All sides of every identity, given the derivative bundle.
Sides assemble(IdentityId id, const DerivativeBundle& b, const IdentityInput& in) {
  const Geometry& geom = b.geometry;
  const double d = b.d;
  const ArrayXd q = b.grad_sq.array();
  const ArrayXd lap = b.lap.array();
  const ArrayXd E = (-0.5 * b.u.array()).exp();
  auto I = [&](const ArrayXd& f) { return integrate(geom, f.matrix()); };

  switch (id) {
    case IdentityId::AlgHessianSplit:
      return {b.hess_sq, (b.L_normsq.array() + lap.square() / d).matrix()};
    case IdentityId::AlgMNorm:
      return {b.M_normsq, ((1 - 1 / d) * q.square()).matrix()};
    case IdentityId::SphereBlwPointwise: {
      const DerivativeBundle bq = differentiate(ScalarField(geom, b.grad_sq));
      const DerivativeBundle bl = differentiate(ScalarField(geom, b.lap));
      const ArrayXd rhs = b.L_normsq.array() + lap.square() / d + bl.grad.array() * b.grad.array() + geom.ricci() * q;
      return {(0.5 * bq.lap.array()).matrix(), rhs.matrix()};
    }
    case IdentityId::SphereIbp:
      return scalar(I(lap * q * E), 0.5 * d / (d + 2) * I(q.square() * E) - 2 * d / (d + 2) * I(b.LM_inner.array() * E));
    case IdentityId::SphereBlwIntegral: {
      const double k = d / (d - 1);
      return scalar(I(lap.square() * E), 0.75 * k * I(lap * q * E) - 0.125 * k * I(q.square() * E) +
                                             k * I(b.L_normsq.array() * E) + k * I(geom.ricci() * q * E));
    }
    case IdentityId::PoincareSlack: {
      const double l1 = *in.lambda1;
      return scalar(I(lap.square() * E), l1 * I(q * E) - I(q.square() * E) / 16 + 0.5 * I(q * lap * E));
    }
    case IdentityId::CircleIntparts:
      return scalar(I(q * b.hess1.array() * E), I(q.square() * E) / 6);
    case IdentityId::CircleElIdentity: {
      const double lambda = *in.el_lambda;
      return scalar(I((0.25 * b.hess1.array().square() + q.square() / 48) * E), 0.5 * lambda * I(q * E));
    }
    case IdentityId::CircleSpectral:
      return scalar(I((b.hess1.array().square() - q.square() / 48) * E), *in.lambda1 * I(q * E));
    default: break;
  }

  // Plane identities: nu-weighted integrals.
  const ArrayXd nu = b.nu.array();
  // Tail beyond R estimated as pi R^2 |integrand(R)|, the size of an r^-4 tail.
  double tail = 0;
  Eigen::Index edge = 0;
  geom.nodes().maxCoeff(&edge);
  const double R = geom.params().truncation;
  auto In = [&](const ArrayXd& f) {
    if (std::isfinite(R)) tail += pi * R * R * std::abs(f(edge) * nu(edge));
    return I(f * nu);
  };
  auto with_tail = [&](Sides s) {
    s.tail = tail;
    return s;
  };
  const ArrayXd ug = b.grad_dot_g.array();
  const ArrayXd ug2 = b.grad_dot_g_sq.array();
  const ArrayXd gdiff = b.grad_g_sq.array() - b.lap_g.array();  // |grad g|^2 - Lap g
  const ArrayXd Hg = b.hess_g_uu.array();
  const ArrayXd Hu = b.hess_u_ug.array();
  const ArrayXd LMug = b.LhalfM_ug.array();
  const ArrayXd LM = b.LM_inner.array();
  const ArrayXd M2 = b.M_normsq.array();
  switch (id) {
    case IdentityId::PlaneElim1:
      return with_tail(scalar(2 * In(lap * ug) - In(q * ug), -2 * In(Hu) - 2 * In(Hg) + 2 * In(ug2)));
    case IdentityId::PlaneElim2:
      return with_tail(scalar(In(LMug), In(Hu) - 0.5 * In(lap * ug) - 0.25 * In(q * ug)));
    case IdentityId::PlaneElim3:
      return with_tail(scalar(-0.5 * In(q * ug), -2 * In(Hu) + In(q * gdiff)));
    case IdentityId::PlaneAbc: {
      Sides s;
      s.lhs = VectorXd(3);
      s.rhs = VectorXd(3);
      s.lhs << In(lap * ug), In(q * ug), In(Hu);
      s.rhs << In(q * gdiff) - 2 * In(LMug), 4 * In(Hg) - 4 * In(ug2) - 8 * In(LMug) + 6 * In(q * gdiff),
          In(Hg) - In(ug2) - 2 * In(LMug) + 2 * In(q * gdiff);
      return with_tail(s);
    }
    case IdentityId::PlaneDE: {
      const Eigen::Index n = q.size();
      Sides s;
      s.lhs = VectorXd(2 * n);
      s.rhs = VectorXd(2 * n);
      s.lhs << b.L_normsq, b.M_normsq;
      s.rhs << (b.hess_sq.array() - 0.5 * lap.square()).matrix(), (0.5 * q.square()).matrix();
      return s;
    }
    case IdentityId::PlaneIpp1:
      return with_tail(scalar(In(lap * q), -In(LM) + 0.5 * In(M2) + 2 * In(Hg) - 2 * In(ug2) - 4 * In(LMug) + 3 * In(q * gdiff)));
    case IdentityId::PlaneIpp2: {
      // Delta q expanded by the product rule; differentiating q spectrally amplifies roundoff where nu is large.
      const DerivativeBundle bl = differentiate(ScalarField(geom, b.lap));
      const ArrayXd lap_q = 2 * b.hess_sq.array() + 2 * (bl.grad.array() * b.grad.array());
      return with_tail(scalar(In(lap_q), -0.5 * In(lap * q) + 0.25 * In(q.square()) + In(q * gdiff) + In(q * ug)));
    }
    case IdentityId::PlaneDeltau2:
      return with_tail(scalar(In(lap.square()), 2 * In(b.L_normsq.array()) - 1.5 * In(LM) + 0.25 * In(M2) - 2 * In(LMug) - In(Hg) +
                                          In(ug2) - 0.5 * In(q * gdiff)));
    case IdentityId::PlaneIZero: {
      const double lambda = *in.el_lambda;
      return with_tail(scalar(2 * In(lap.square()) + In(lap * q), 16 * pi * lambda * I(q * E)));
    }
    case IdentityId::PlaneFinal: {
      const double lambda = *in.el_lambda;
      const ArrayXd bracket = b.lap_g.array() + b.grad_g_sq.array() - b.omega_g_sq.array();
      return with_tail(scalar(4 * In(b.LMN_normsq.array()) - 2 * In(bracket * q), 16 * pi * lambda * I(q * E)));
    }
    default: break;
  }
  throw Error(ErrorCode::InvalidParameter, "identity has no assembly rule");
}

}  // namespace

IdentityReport verify_identity(IdentityId id, const IdentityInput& input, double tol) {
  const IdentityInfo& info = identity_info(id);
  const Geometry& geom = input.field.geometry();
  if (!(tol > 0)) throw Error(ErrorCode::InvalidParameter, "tolerance must be positive");
  if (!identity_applies(id, geom.kind())) {
    throw Error(ErrorCode::GeometryMismatch, std::string(info.name) + " does not apply to " + to_string(geom.kind()));
  }
  if (info.requires_el && !input.el_lambda) {
    throw Error(ErrorCode::NeedsElSolution, std::string(info.name) + " needs an Euler-Lagrange solution");
  }
  DerivativeBundle b = differentiate(input.field);
  if (geom.kind() == GeometryKind::PlaneRadial) {
    if (!input.weight) throw Error(ErrorCode::InvalidParameter, "plane identities need a weight profile");
    couple_weight(b, *input.weight);
  }
  IdentityInput in = input;
  if ((id == IdentityId::PoincareSlack || id == IdentityId::CircleSpectral) && !in.lambda1) {
    in.lambda1 = first_eigenvalue(geom);
  }
  const Sides s = assemble(id, b, in);

  IdentityReport rep;
  rep.id = id;
  rep.name = info.name;
  rep.tol = tol;
  rep.inequality = info.inequality;
  rep.geometry = geom.descriptor();
  rep.context = input.provenance;
  switch (info.norm) {
    case IdentityNorm::Integral:
      rep.lhs = s.lhs(0);
      rep.rhs = s.rhs(0);
      rep.abs_err = info.inequality ? std::max(0.0, rep.rhs - rep.lhs) : std::abs(rep.lhs - rep.rhs);
      break;
    case IdentityNorm::PointwiseSup:
      rep.lhs = s.lhs.cwiseAbs().maxCoeff();
      rep.rhs = s.rhs.cwiseAbs().maxCoeff();
      rep.abs_err = (s.lhs - s.rhs).cwiseAbs().maxCoeff();
      break;
    case IdentityNorm::MultiL2:
      rep.lhs = s.lhs.norm();
      rep.rhs = s.rhs.norm();
      rep.abs_err = (s.lhs - s.rhs).norm();
      break;
  }
  const double scale = std::max({std::abs(rep.lhs), std::abs(rep.rhs), 1e-30});
  rep.rel_err = rep.abs_err / scale;
  rep.truncation_tail = s.tail / scale;
  rep.pass = std::isfinite(rep.rel_err) && rep.rel_err <= tol;
  return rep;
}

ScalarField random_field(const Geometry& geom, std::uint64_t seed, int trial, int modes) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(trial) * 1000003ULL +
                      static_cast<std::uint64_t>(geom.kind()));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(-1, 1);
  VectorXd v = VectorXd::Zero(geom.resolution());
  const VectorXd& x = geom.nodes();
  switch (geom.kind()) {
    case GeometryKind::Circle: {
      const double w = 2 * pi / geom.params().period;
      for (int k = 1; k <= modes; ++k) {
        const double amp = std::pow(k, -4.0);
        const double a = amp * normal(rng), b = amp * normal(rng);
        v.array() += a * (w * k * x.array()).cos() + b * (w * k * x.array()).sin();
      }
      break;
    }
    case GeometryKind::SphereZonal: {
      VectorXd c(modes + 1);
      for (int k = 0; k <= modes; ++k) c(k) = std::pow(k + 1, -4.0) * normal(rng);
      const VectorXd t = x.array().cos().matrix();
      for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = spectral::legendre_eval(c, t(j));
      break;
    }
    case GeometryKind::PlaneRadial: {
      VectorXd c(modes + 1);
      for (int k = 0; k <= modes; ++k) c(k) = std::pow(k + 1, -4.0) * normal(rng);
      for (Eigen::Index j = 0; j < v.size(); ++j) {
        const double s = 1 / (1 + x(j) * x(j));
        v(j) = s * s * spectral::legendre_eval(c, 2 * s - 1);
      }
      break;
    }
  }
  // A random mean on the circle, where the modes above have none.
  if (geom.kind() == GeometryKind::Circle) v.array() += 0.5 * uniform(rng) * v.cwiseAbs().maxCoeff();
  const double sup = v.cwiseAbs().maxCoeff();
  if (sup > 0) v /= sup;
  return ScalarField(geom, std::move(v));
}

namespace {

template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

const std::vector<IdentityId>& suite_identities(GeometryKind kind) {
  static const std::vector<IdentityId> circle = {IdentityId::AlgHessianSplit, IdentityId::CircleIntparts,
                                                 IdentityId::CircleSpectral};
  static const std::vector<IdentityId> sphere = {IdentityId::AlgHessianSplit, IdentityId::AlgMNorm,
                                                 IdentityId::SphereBlwPointwise, IdentityId::SphereIbp,
                                                 IdentityId::SphereBlwIntegral, IdentityId::PoincareSlack};
  static const std::vector<IdentityId> plane = {IdentityId::PlaneElim1, IdentityId::PlaneElim2, IdentityId::PlaneElim3,
                                                IdentityId::PlaneAbc,   IdentityId::PlaneDE,    IdentityId::PlaneIpp1,
                                                IdentityId::PlaneIpp2,  IdentityId::PlaneDeltau2};
  switch (kind) {
    case GeometryKind::Circle: return circle;
    case GeometryKind::SphereZonal: return sphere;
    case GeometryKind::PlaneRadial: return plane;
  }
  return circle;
}

}  // namespace

SuiteSummary run_suite(const SuiteConfig& cfg) {
  std::vector<GeometryKind> kinds;
  if (cfg.suite == "circle" || cfg.suite == "all") kinds.push_back(GeometryKind::Circle);
  if (cfg.suite == "sphere" || cfg.suite == "all") kinds.push_back(GeometryKind::SphereZonal);
  if (cfg.suite == "plane" || cfg.suite == "all") kinds.push_back(GeometryKind::PlaneRadial);
  if (kinds.empty()) throw Error(ErrorCode::InvalidParameter, "unknown suite '" + cfg.suite + "'");
  if (cfg.trials < 1) throw Error(ErrorCode::InvalidParameter, "trials must be >= 1");
  if (!(cfg.tol > 0)) throw Error(ErrorCode::InvalidParameter, "tolerance must be positive");

  SuiteSummary summary;
  for (GeometryKind kind : kinds) {
    Geometry geom = [&] {
      GeometryParams p;
      switch (kind) {
        case GeometryKind::Circle: return build_geometry(kind, cfg.circle_resolution, p);
        case GeometryKind::SphereZonal: return build_geometry(kind, cfg.sphere_resolution, p);
        case GeometryKind::PlaneRadial:
          p.truncation = cfg.plane_truncation;
          return build_geometry(kind, cfg.plane_resolution, p);
      }
      return build_geometry(kind, cfg.circle_resolution, p);
    }();
    std::vector<std::pair<std::string, RadialWeightProfile>> weights;
    std::optional<double> lambda1;
    if (kind == GeometryKind::PlaneRadial) {
      WeightSpec st;
      WeightSpec pert;
      pert.kind = WeightKind::Perturbed;
      pert.amplitude = cfg.plane_perturbation;
      for (const WeightSpec& spec : {st, pert}) {
        // Identities only need g and its derivatives; the profile is not renormalized on the truncated disk.
        const Weight w = make_weight(spec, geom);
        weights.emplace_back(spec.text(), w.profile);
      }
    } else {
      lambda1 = first_eigenvalue(geom);
    }
    const auto& ids = suite_identities(kind);
    std::vector<std::vector<IdentityReport>> per_trial(cfg.trials);
    parallel_for(cfg.trials, cfg.jobs, [&](int trial) {
      IdentityInput in(random_field(geom, cfg.seed, trial));
      in.lambda1 = lambda1;
      auto run = [&](const std::string& tag) {
        in.provenance = "random seed=" + std::to_string(cfg.seed) + " trial=" + std::to_string(trial) + tag;
        for (IdentityId id : ids) {
          IdentityReport r = verify_identity(id, in, cfg.tol);
          r.seed = cfg.seed;
          r.trial = trial;
          per_trial[trial].push_back(std::move(r));
        }
      };
      if (weights.empty()) {
        run("");
      } else {
        for (const auto& [name, profile] : weights) {
          in.weight = profile;
          run(" weight=" + name);
        }
      }
    });
    for (auto& v : per_trial) {
      for (auto& r : v) summary.reports.push_back(std::move(r));
    }
  }
  for (const auto& r : summary.reports) {
    (r.pass ? summary.passed : summary.failed)++;
    double& worst = r.inequality ? summary.worst_inequality_rel_err : summary.worst_equality_rel_err;
    worst = std::max(worst, r.rel_err);
  }
  return summary;
}

void write_reports_csv(std::ostream& os, const std::vector<IdentityReport>& reports) {
  os << "identity_id,geometry,seed,trial,lhs,rhs,rel_err,pass\n";
  for (const auto& r : reports) {
    os << r.name << ",\"" << r.geometry;
    if (!r.context.empty()) os << " " << r.context;
    os << "\"," << r.seed << "," << r.trial;
    for (double v : {r.lhs, r.rhs, r.rel_err}) os << "," << format_double(v);
    os << "," << (r.pass ? "true" : "false") << "\n";
  }
}

}  // namespace onofri
