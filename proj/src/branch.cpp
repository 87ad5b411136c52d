#include "onofri/branch.hpp"

#include "onofri/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <cstdio>
#include <limits>

namespace onofri {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void require_compact(const Geometry& geom) {
  if (geom.kind() == GeometryKind::PlaneRadial) {
    throw Error(ErrorCode::UnsupportedGeometry, "the unweighted equation is posed on the circle or the sphere");
  }
}

VectorXd el_residual(const MatrixXd& lap, const VectorXd& u, double lambda) {
  // Lap annihilates constants; removing the midrange first keeps its roundoff out.
  const VectorXd centered = (u.array() - 0.5 * (u.maxCoeff() + u.minCoeff())).matrix();
  return -0.5 * (lap * centered) + VectorXd::Constant(u.size(), lambda) - u.array().exp().matrix();
}

double sup(const VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

double log_mean_exp(const Geometry& geom, const VectorXd& u) {
  const double top = u.maxCoeff();
  return top + std::log(integrate(geom, (u.array() - top).exp().matrix()) / geom.volume());
}

}  // namespace

double distance_to_constant(const ScalarField& u) {
  const Geometry& geom = u.geometry();
  const double mean = integrate(u) / geom.volume();
  return (u.values().array() - mean).abs().maxCoeff();
}

namespace {

struct NewtonRun {
  VectorXd u;
  double norm = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

// Damped Newton on F(u) = -1/2 Lap u + lambda - e^u. With a deflation root u*,
// the merit is m(u) F(u), m = 1 + 1/|u - u*|^2, which keeps iterates off u*.
NewtonRun newton(const Geometry& geom, double lambda, VectorXd u, const NewtonConfig& cfg, const VectorXd* root) {
  const MatrixXd& lap = geom.laplacian_matrix();
  const VectorXd w = geom.weights() / geom.volume();
  auto dist2 = [&](const VectorXd& v) { return w.dot((v - *root).cwiseAbs2()); };
  // Newton directions descend on the L2 norm of F, not on its sup norm.
  auto merit = [&](const VectorXd& v, const VectorXd& r) {
    const double l2 = std::sqrt(w.dot(r.cwiseAbs2()));
    return root ? (1 + 1 / dist2(v)) * l2 : l2;
  };

  NewtonRun run;
  VectorXd res = el_residual(lap, u, lambda);
  double m = merit(u, res);
  run.history.push_back(sup(res));
  while (sup(res) > cfg.tol && run.iterations < cfg.max_iterations) {
    ++run.iterations;
    MatrixXd jac = -0.5 * lap;
    jac.diagonal() -= u.array().exp().matrix();
    VectorXd step = jac.completeOrthogonalDecomposition().solve(-res);
    if (root) {
      // Sherman-Morrison form of the deflated Newton step.
      const double d2 = dist2(u);
      const double mu = 1 + 1 / d2;
      const double dm = -2 * w.dot((u - *root).cwiseProduct(step)) / (d2 * d2);
      const double denom = 1 - dm / mu;
      if (std::abs(denom) > 1e-12) step /= denom;
    }
    double t = 1;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
      // Integrating the equation gives int e^u = lambda V; restore it by a shift.
      VectorXd trial = u + t * step;
      trial.array() += std::log(lambda) - log_mean_exp(geom, trial);
      const VectorXd trial_res = el_residual(lap, trial, lambda);
      const double trial_m = merit(trial, trial_res);
      if (std::isfinite(trial_m) && trial_m < m) {
        u = trial;
        res = trial_res;
        m = trial_m;
        accepted = true;
        break;
      }
    }
    run.history.push_back(sup(res));
    if (!accepted) break;
  }
  run.norm = sup(res);
  // A stalled line search is accepted at the roundoff floor of the collocation
  // Laplacian, which grows like eps N^2 sup|u - c| and exceeds 1e-10 near N = 512.
  const double spread = 0.5 * (u.maxCoeff() - u.minCoeff());
  const double floor = 16 * std::numeric_limits<double>::epsilon() * lap.diagonal().cwiseAbs().maxCoeff() * (1 + spread);
  run.converged = run.norm <= std::max(cfg.tol, floor);
  run.u = std::move(u);
  return run;
}

}  // namespace

BranchPoint solve_el(double lambda, const ScalarField& init, const NewtonConfig& cfg) {
  if (!(lambda > 0)) throw Error(ErrorCode::DomainError, "lambda must be positive");
  const Geometry& geom = init.geometry();
  require_compact(geom);
  if (!init.values().allFinite()) throw Error(ErrorCode::InvalidParameter, "initial field is not finite");

  NewtonRun run = newton(geom, lambda, init.values(), cfg, nullptr);
  if (!run.converged) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "lambda=%g: residual %.3e after %d iterations (%zu recorded)", lambda, run.norm,
                  run.iterations, run.history.size());
    throw Error(ErrorCode::NewtonDiverged, msg);
  }
  auto is_constant = [&](const VectorXd& v) {
    return distance_to_constant(ScalarField(geom, v)) <= kConstantBranchThreshold;
  };
  if (is_constant(run.u) && cfg.deflate_constant && distance_to_constant(init) > kConstantBranchThreshold &&
      linearized_min_eigenvalue(geom, lambda) < 0) {
    const VectorXd root = VectorXd::Constant(run.u.size(), std::log(lambda));
    NewtonRun deflated = newton(geom, lambda, init.values(), cfg, &root);
    if (deflated.converged && !is_constant(deflated.u)) {
      deflated.iterations += run.iterations;
      run.history.insert(run.history.end(), deflated.history.begin(), deflated.history.end());
      deflated.history = std::move(run.history);
      run = std::move(deflated);
    }
  }

  BranchPoint bp(lambda, ScalarField(geom, run.u));
  bp.iterations = run.iterations;
  bp.residual_history = std::move(run.history);
  bp.distance_to_constant = distance_to_constant(bp.solution);
  if (bp.distance_to_constant <= kConstantBranchThreshold) {
    // The constant root is known exactly.
    bp.branch_tag = BranchTag::Constant;
    bp.solution = ScalarField::constant(geom, std::log(lambda));
    bp.distance_to_constant = 0;
    bp.newton_residual = sup(el_residual(geom.laplacian_matrix(), bp.solution.values(), lambda));
  } else {
    bp.branch_tag = BranchTag::Nonconstant;
    bp.newton_residual = run.norm;
  }
  return bp;
}

double linearized_min_eigenvalue(const Geometry& geom, double lambda) {
  require_compact(geom);
  // Symmetrize with the quadrature weights and push the constant mode to the top.
  const VectorXd sw = geom.weights().cwiseSqrt();
  MatrixXd a = -0.5 * (sw.asDiagonal() * geom.laplacian_matrix() * sw.cwiseInverse().asDiagonal());
  a = 0.5 * (a + a.transpose()).eval();
  a.diagonal().array() -= lambda;
  const VectorXd c = sw.normalized();
  const double shift = a.cwiseAbs().rowwise().sum().maxCoeff() + std::abs(lambda) + 1;
  a += shift * c * c.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

BifurcationResult bifurcation_scan(const Geometry& geom, double lambda_min, double lambda_max, int steps) {
  if (!(lambda_min > 0) || !(lambda_max > lambda_min) || steps < 1) {
    throw Error(ErrorCode::InvalidParameter, "scan needs 0 < lambda_min < lambda_max and steps >= 1");
  }
  BifurcationResult out;
  auto f = [&](double lam) {
    ++out.evaluations;
    return linearized_min_eigenvalue(geom, lam);
  };
  double lo = lambda_min, flo = f(lo);
  double hi = lo, fhi = flo;
  bool found = false;
  for (int i = 1; i <= steps; ++i) {
    hi = lambda_min + (lambda_max - lambda_min) * i / steps;
    fhi = f(hi);
    if ((flo > 0) != (fhi > 0)) {
      found = true;
      break;
    }
    lo = hi;
    flo = fhi;
  }
  if (!found) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "no sign change of the linearized eigenvalue on [%g, %g]", lambda_min, lambda_max);
    throw Error(ErrorCode::NoSignChange, msg);
  }
  while (hi - lo > 1e-4 * hi) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.lambda_c = lo - flo * (hi - lo) / (fhi - flo);
  return out;
}

}  // namespace onofri
