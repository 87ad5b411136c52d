#include "onofri/sphere.hpp"

#include "onofri/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

namespace onofri {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void require_sphere(const Geometry& geom) {
  if (geom.kind() != GeometryKind::SphereZonal) throw Error(ErrorCode::GeometryMismatch, "expected a sphere geometry");
}

// Returns m with log(int e^u) = m + log(int e^{u - m}).
double log_integral_exp(const Geometry& geom, const VectorXd& u) {
  const double top = u.maxCoeff();
  return top + std::log(integrate(geom, (u.array() - top).exp().matrix()));
}

}  // namespace

QuotientReport lambda_star_quotient(const ScalarField& u) {
  const Geometry& geom = u.geometry();
  require_sphere(geom);
  const DerivativeBundle b = differentiate(u);
  const double scale = 1 + u.values().cwiseAbs().maxCoeff();
  if (b.grad_sq.maxCoeff() <= 1e-26 * scale * scale) {
    throw Error(ErrorCode::ConstantField, "the quotient is undefined for constant fields");
  }
  // e^{-u/2} relative to its value at max u; the common factor cancels in Q.
  const ArrayXd E = (-0.5 * (b.u.array() - b.u.maxCoeff())).exp();
  QuotientReport r;
  r.tensor_term = integrate(geom, (b.LhalfM_normsq.array() * E).matrix());
  r.denominator = integrate(geom, (b.grad_sq.array() * E).matrix());
  r.ricci_term = geom.ricci() * r.denominator;
  r.value = (r.tensor_term + r.ricci_term) / r.denominator;
  const double undo = std::exp(-0.5 * b.u.maxCoeff());
  r.tensor_term *= undo;
  r.ricci_term *= undo;
  r.denominator *= undo;
  return r;
}

namespace {

// P_1..P_k at the nodes, one column per degree.
MatrixXd legendre_columns(const Geometry& geom, int k) {
  const VectorXd t = geom.nodes().array().cos().matrix();
  MatrixXd out(t.size(), k);
  VectorXd prev = VectorXd::Ones(t.size()), cur = t;
  for (int n = 1; n <= k; ++n) {
    out.col(n - 1) = cur;
    const VectorXd next = ((2.0 * n + 1) * t.cwiseProduct(cur) - n * prev) / (n + 1.0);
    prev = cur;
    cur = next;
  }
  return out;
}

struct Descent {
  VectorXd coeffs;
  double value = 0;
  int evaluations = 0;
  bool stalled = false;
};

class QuotientObjective {
 public:
  QuotientObjective(const Geometry& geom, int modes) : geom_(geom), basis_(legendre_columns(geom, modes)) {}

  double operator()(const VectorXd& c) const {
    try {
      return lambda_star_quotient(ScalarField(geom_, basis_ * c)).value;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  ScalarField field(const VectorXd& c) const { return ScalarField(geom_, basis_ * c); }

 private:
  Geometry geom_;
  MatrixXd basis_;
};

VectorXd project(VectorXd c, const OptimizerConfig& cfg) {
  const double n = c.norm();
  if (n < cfg.min_amplitude) c *= cfg.min_amplitude / std::max(n, 1e-300);
  if (n > cfg.max_amplitude) c *= cfg.max_amplitude / n;
  return c;
}

Descent descend(const QuotientObjective& q, VectorXd c, const OptimizerConfig& cfg) {
  Descent d;
  c = project(std::move(c), cfg);
  double fc = q(c);
  ++d.evaluations;
  double step = 1;
  bool converged = false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    VectorXd grad(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double h = 1e-6 * std::max(1e-3, std::abs(c(i)));
      VectorXd p = c, m = c;
      p(i) += h;
      m(i) -= h;
      grad(i) = (q(p) - q(m)) / (2 * h);
    }
    d.evaluations += 2 * static_cast<int>(c.size());
    if (!grad.allFinite()) break;
    bool accepted = false;
    step *= 2;
    for (int h = 0; h < 60; ++h, step *= 0.5) {
      const VectorXd trial = project(c - step * grad, cfg);
      const double ft = q(trial);
      ++d.evaluations;
      if (ft <= fc - 1e-4 * grad.dot(c - trial)) {
        const double gain = fc - ft;
        const double moved = (trial - c).norm();
        c = trial;
        fc = ft;
        accepted = true;
        if (gain <= 1e-12 * std::abs(fc) || moved <= 1e-12 * (1 + c.norm())) converged = true;
        break;
      }
    }
    if (!accepted || converged) {
      converged = true;
      break;
    }
  }
  d.coeffs = c;
  d.value = fc;
  d.stalled = !converged;
  return d;
}

}  // namespace

LambdaStarEstimate minimize_lambda_star(const Geometry& geom, const OptimizerConfig& cfg) {
  require_sphere(geom);
  if (cfg.seeds < 1 || cfg.modes < 1 || cfg.max_iterations < 1 || !(cfg.min_amplitude > 0) ||
      !(cfg.max_amplitude > cfg.min_amplitude) || cfg.refinements < 0) {
    throw Error(ErrorCode::InvalidParameter, "invalid optimizer configuration");
  }
  if (cfg.modes << cfg.refinements >= geom.resolution()) {
    throw Error(ErrorCode::InvalidParameter, "too many modes for the resolution");
  }
  const QuotientObjective q(geom, cfg.modes);
  std::vector<Descent> runs(cfg.seeds);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int s = next++; s < cfg.seeds; s = next++) {
      std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(s));
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> unit(0, 1);
      VectorXd c(cfg.modes);
      for (int k = 0; k < cfg.modes; ++k) c(k) = normal(rng) / (k + 1);
      // Log-uniform amplitude over the admissible annulus.
      const double amp =
          cfg.min_amplitude * std::pow(cfg.max_amplitude / cfg.min_amplitude, unit(rng));
      runs[s] = descend(q, c.normalized() * amp, cfg);
    }
  };
  const int jobs = std::max(1, std::min(cfg.jobs, cfg.seeds));
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  int probes = 0;
  const Descent* best = &runs.front();
  for (const auto& r : runs) {
    probes += r.evaluations;
    if (r.value < best->value) best = &r;
  }
  Descent current = *best;
  int modes = cfg.modes;
  for (int level = 0; level < cfg.refinements; ++level) {
    const int wider = 2 * modes;
    const QuotientObjective qw(geom, wider);
    VectorXd c = VectorXd::Zero(wider);
    c.head(modes) = current.coeffs;
    Descent refined = descend(qw, c, cfg);
    probes += refined.evaluations;
    if (refined.value <= current.value) current = refined;
    else current.stalled = current.stalled || refined.stalled;
    modes = wider;
  }
  LambdaStarEstimate out(QuotientObjective(geom, static_cast<int>(current.coeffs.size())).field(current.coeffs));
  out.value = current.value;
  out.probe_count = probes;
  out.stalled = current.stalled;
  return out;
}

BranchPoint solve_el_sphere(double lambda, const ScalarField& init, const NewtonConfig& cfg) {
  require_sphere(init.geometry());
  return solve_el(lambda, init, cfg);
}

BifurcationResult bifurcation_scan_sphere(const Geometry& geom, double lambda_min, double lambda_max, int steps) {
  require_sphere(geom);
  return bifurcation_scan(geom, lambda_min, lambda_max, steps);
}

double functional_F(const ScalarField& u, double lambda) {
  const Geometry& geom = u.geometry();
  if (geom.kind() == GeometryKind::PlaneRadial) {
    throw Error(ErrorCode::UnsupportedGeometry, "F is defined on the circle and the sphere");
  }
  const double vol = geom.volume();
  // Work with u - max u: the value is shift invariant and this cannot overflow.
  const VectorXd v = (u.values().array() - u.values().maxCoeff()).matrix();
  const DerivativeBundle b = differentiate(u);
  return 0.25 * integrate(geom, b.grad_sq) + lambda * integrate(geom, v) -
         lambda * vol * (log_integral_exp(geom, v) - std::log(vol));
}

double dissipation_G(const ScalarField& f, double lambda) {
  const Geometry& geom = f.geometry();
  require_sphere(geom);
  const DerivativeBundle b = differentiate(f);
  const ArrayXd E = (-0.5 * b.u.array()).exp();
  const double tensor = integrate(geom, (b.LhalfM_normsq.array() * E).matrix());
  const double denom = integrate(geom, (b.grad_sq.array() * E).matrix());
  return tensor + (geom.ricci() - lambda) * denom;
}

namespace {

struct FlowState {
  VectorXd f;
  double g_integral = 0;
};

// Right-hand side of the flow plus the dissipation that feeds the integral of G.
FlowState flow_rate(const Geometry& geom, const VectorXd& f, double lambda) {
  const ScalarField field(geom, f);
  const DerivativeBundle b = differentiate(field);
  FlowState r;
  r.f = ((b.lap.array() + 0.5 * b.grad_sq.array()) * (-0.5 * b.u.array()).exp()).matrix();
  r.g_integral = dissipation_G(field, lambda);
  return r;
}

}  // namespace

FlowTrace flow_evolve(const ScalarField& u0, double lambda, double t_final, const FlowConfig& cfg) {
  const Geometry& geom = u0.geometry();
  require_sphere(geom);
  if (!(lambda > 0)) throw Error(ErrorCode::DomainError, "lambda must be positive");
  if (!(t_final > 0) || !(cfg.output_interval > 0) || !(cfg.safety > 0)) {
    throw Error(ErrorCode::InvalidParameter, "t_final, output interval and safety must be positive");
  }
  const double dx = std::numbers::pi * geom.sphere_radius() / geom.resolution();
  FlowTrace trace(u0);
  VectorXd f = u0.values();
  double g_int = 0, t = 0;
  auto record = [&] {
    const ScalarField field(geom, f);
    trace.times.push_back(t);
    trace.F_values.push_back(functional_F(field, lambda));
    trace.G_values.push_back(dissipation_G(field, lambda));
    trace.mass_values.push_back(integrate(geom, f.array().exp().matrix()));
    trace.sup_f.push_back(f.cwiseAbs().maxCoeff());
    trace.G_integral.push_back(g_int);
  };
  record();
  const int intervals = std::max(1, static_cast<int>(std::ceil(t_final / cfg.output_interval - 1e-9)));
  for (int k = 1; k <= intervals; ++k) {
    const double t_next = std::min(t_final, k * cfg.output_interval);
    const double span = t_next - t;
    // The diffusion coefficient is e^{-f/2}; its maximum sets the explicit step.
    const double dt_max = cfg.safety * dx * dx * std::exp(0.5 * f.minCoeff());
    if (!(dt_max >= cfg.min_step)) {
      char msg[96];
      std::snprintf(msg, sizeof msg, "time step %.3e below %.1e at t=%g", dt_max, cfg.min_step, t);
      throw Error(ErrorCode::StepFailure, msg);
    }
    const int n = std::max(1, static_cast<int>(std::ceil(span / dt_max)));
    const double dt = span / n;
    for (int i = 0; i < n; ++i) {
      const FlowState k1 = flow_rate(geom, f, lambda);
      const FlowState k2 = flow_rate(geom, f + 0.5 * dt * k1.f, lambda);
      const FlowState k3 = flow_rate(geom, f + 0.5 * dt * k2.f, lambda);
      const FlowState k4 = flow_rate(geom, f + dt * k3.f, lambda);
      f += dt / 6 * (k1.f + 2 * k2.f + 2 * k3.f + k4.f);
      g_int += dt / 6 * (k1.g_integral + 2 * k2.g_integral + 2 * k3.g_integral + k4.g_integral);
      ++trace.steps;
      const double sup = f.cwiseAbs().maxCoeff();
      if (!std::isfinite(sup) || sup > cfg.blowup_threshold) {
        char msg[96];
        std::snprintf(msg, sizeof msg, "sup |f| = %.3e exceeds %.1e at t=%g", sup, cfg.blowup_threshold, t + (i + 1) * dt);
        throw Error(ErrorCode::BlowupDetected, msg);
      }
    }
    t = t_next;
    record();
  }
  trace.final_field = ScalarField(geom, f);
  return trace;
}

}  // namespace onofri
