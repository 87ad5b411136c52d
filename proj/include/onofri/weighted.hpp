#pragma once

// Onofri-type inequalities on the plane with radial probability weights
// mu = e^g: weight construction, the thresholds Lambda_star and Lambda(u),
// Keller-Segel steady states, the radial Euler-Lagrange solver and the deficit.

#include "onofri/branch.hpp"
#include "onofri/geometry.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace onofri {

enum class WeightKind { Stereographic, Gaussian, Perturbed, KellerSegel, KsSelfSimilar };

const char* to_string(WeightKind kind);

struct WeightSpec {
  WeightKind kind = WeightKind::Stereographic;
  double sigma = 1;      // gaussian
  double amplitude = 0;  // perturbed: h = amplitude / (1 + r^2)
  double mass = 0;       // Keller-Segel M
  double epsilon = 0;    // self-similar drift
  std::string text() const;
};

/// "stereographic", "gaussian:<sigma>", "perturbed:<A>", "keller-segel:<M>",
/// "ks-selfsim:<M>:<eps>".
WeightSpec parse_weight_spec(const std::string& text);

struct KellerSegelConfig {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iterations = 2000;
};

struct Weight {
  Weight(WeightSpec s, Geometry g) : spec(s), geometry(std::move(g)) {}

  WeightSpec spec;
  Geometry geometry;
  RadialWeightProfile profile;  // mu, g, g', g'', Laplacian of g at nodes
  double normalization_defect = 0;
  double expected_mass = 1;     // mass of the exact density inside the truncation radius
  // Keller-Segel data (empty otherwise): chemical potential c, r c'(r), history of update norms.
  Eigen::VectorXd c, r_dc;
  std::vector<double> update_history;
  int iterations = 0;
  /// Ratio (-Laplacian g) / (8 pi mu) at r = 0 and at the outer end (r = R or r -> infinity).
  double ratio_origin = 0, ratio_outer = 0;
};

/// Builds a weight on a plane geometry. Keller-Segel kinds run solve_keller_segel.
Weight make_weight(const WeightSpec& spec, const Geometry& geom, const KellerSegelConfig& ks = {});

/// Perturbed stereographic weight e^{-h} / (Z (1+r^2)^2) for an arbitrary radial h.
/// On a disk, Z includes the exterior with h frozen at its edge value.
Weight make_perturbed_weight(const ScalarField& h);

/// Pointwise ratio (-Laplacian log mu) / (8 pi mu) at the nodes.
Eigen::VectorXd weight_ratio(const Weight& w);

struct LambdaStarWeight {
  double value = 0;
  double inf_location_r = 0;
};

LambdaStarWeight lambda_star_weight(const Weight& w);

/// Radial steady state -Lap c = eps x.grad c + n, n = M e^{c - r^2/2} / int e^{c - r^2/2}.
Weight solve_keller_segel(double mass, double epsilon, const Geometry& geom, const KellerSegelConfig& cfg = {});

/// Mass recovered from the chemical potential alone: by the divergence theorem
/// M = -2 pi (r c')(R) - eps int r c'(r) dx. Throws InvalidParameter for other kinds.
double ks_recovered_mass(const Weight& w);

/// sup over nodes of |(-Lap log mu)/(8 pi mu) - (eps r c' + 2)/(8 pi mu) - M/(8 pi)|,
/// each term divided by max(1, |(-Lap log mu)/(8 pi mu)|).
double ks_decomposition_defect(const Weight& w);

struct PerturbationBound {
  double variation = 0;      // sup h - inf h
  double inf_weighted_lap = 0;  // inf (1+r^2)^2 Lap h
  double bound = 0;          // e^{-Var} (1 + inf/8)
  double lambda_star = 0;    // computed for the perturbed weight
  bool consistent = true;    // bound <= lambda_star + 1e-8
};

PerturbationBound perturbation_bound(const ScalarField& h);
/// e^{-variation} (1 + inf_weighted_lap / 8).
double perturbation_bound_value(double variation, double inf_weighted_lap);

/// Residual of -(1/8pi) Lap u + lambda mu - lambda e^u mu at the nodes.
Eigen::VectorXd weighted_el_residual(const Weight& w, const ScalarField& u, double lambda);

BranchPoint solve_el_weighted(double lambda, const Weight& w, const ScalarField& init, const NewtonConfig& cfg = {});

/// u_sigma = 2 log sigma + 2 log(1+r^2) - 2 log(1+sigma^2 r^2).
ScalarField dilation_field(const Geometry& geom, double sigma);

double capital_lambda_quotient(const Weight& w, const ScalarField& u);

double onofri_deficit_weighted(const Weight& w, const ScalarField& u, double lambda);

/// Columns r, mu, g, dg, lap_g.
void write_weight_profile_csv(std::ostream& os, const Weight& w);

}  // namespace onofri
