#pragma once

// Zonal fields on the round sphere: the rigidity quotient, the equation
//   -1/2 Lap u + lambda = e^u,
// the functional F, its dissipation G and the mass-preserving flow.

#include "onofri/branch.hpp"
#include "onofri/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace onofri {

/// Q(u) = (tensor_term + ricci_term) / denominator, all weighted by e^{-u/2}.
struct QuotientReport {
  double value = 0;
  double tensor_term = 0;  // int |L u - M u / 2|^2 e^{-u/2}
  double ricci_term = 0;   // int rho |grad u|^2 e^{-u/2}
  double denominator = 0;  // int |grad u|^2 e^{-u/2}
  std::string provenance;
};

/// Throws ConstantField when the gradient vanishes to roundoff.
QuotientReport lambda_star_quotient(const ScalarField& u);

struct OptimizerConfig {
  int seeds = 16;
  int modes = 12;  // Legendre modes P_1..P_modes
  int max_iterations = 1000;
  double min_amplitude = 1e-3;  // coefficient-vector norm kept in [min, max]
  double max_amplitude = 5;
  int refinements = 1;  // mode doublings after the multistart stage
  std::uint64_t seed = 11;
  int jobs = 1;
};

struct LambdaStarEstimate {
  explicit LambdaStarEstimate(ScalarField m) : minimizer(std::move(m)) {}

  double value = 0;
  ScalarField minimizer;
  int probe_count = 0;  // quotient evaluations
  bool stalled = false;  // iteration budget hit before the step size collapsed
};

/// Multistart projected gradient descent over zonal Legendre fields.
LambdaStarEstimate minimize_lambda_star(const Geometry& geom, const OptimizerConfig& cfg = {});

/// Newton solve on the zonal sphere. Throws NewtonDiverged.
BranchPoint solve_el_sphere(double lambda, const ScalarField& init, const NewtonConfig& cfg = {});

BifurcationResult bifurcation_scan_sphere(const Geometry& geom, double lambda_min, double lambda_max, int steps);

/// F = 1/4 int |grad u|^2 + lambda int u - lambda V log(int e^u / V), V the
/// volume. Shift invariant and zero on constants.
double functional_F(const ScalarField& u, double lambda);

/// G = tensor_term + ricci_term - lambda denominator, so that dF/dt = -G.
double dissipation_G(const ScalarField& f, double lambda);

struct FlowConfig {
  double safety = 0.25;  // dt = safety (pi a / N)^2 e^{min f / 2}
  double output_interval = 0.0025;
  double blowup_threshold = 1e3;
  double min_step = 1e-12;
};

struct FlowTrace {
  explicit FlowTrace(ScalarField f) : final_field(std::move(f)) {}

  std::vector<double> times, F_values, G_values, mass_values, sup_f;
  std::vector<double> G_integral;  // int_0^t G, integrated with the state
  ScalarField final_field;
  int steps = 0;
};

/// Integrates df/dt = (Lap f + |grad f|^2 / 2) e^{-f/2} with classical RK4.
/// Throws StepFailure or BlowupDetected.
FlowTrace flow_evolve(const ScalarField& u0, double lambda, double t_final, const FlowConfig& cfg = {});

}  // namespace onofri
