#pragma once

#include "onofri/geometry.hpp"

#include <string>
#include <vector>

namespace onofri {

enum class BranchTag { Constant, Nonconstant };

inline const char* to_string(BranchTag t) { return t == BranchTag::Constant ? "constant" : "nonconstant"; }

/// A converged solution of one of the Euler-Lagrange equations.
struct BranchPoint {
  BranchPoint(double lam, ScalarField u) : lambda(lam), solution(std::move(u)) {}

  double lambda = 0;
  ScalarField solution;
  BranchTag branch_tag = BranchTag::Constant;
  double newton_residual = 0;
  double distance_to_constant = 0;  // sup |u - mean(u)|
  int iterations = 0;
  std::vector<double> residual_history;
};

struct NewtonConfig {
  double tol = 1e-10;
  int max_iterations = 60;
  int max_halvings = 40;
  // When Newton lands on the constant branch while it is linearly unstable,
  // retry from the same init with the constant root deflated.
  bool deflate_constant = true;
};

/// Tags a solution as constant when sup |u - mean u| <= 1e-6.
inline constexpr double kConstantBranchThreshold = 1e-6;

struct BifurcationResult {
  double lambda_c = 0;
  double bracket_lo = 0, bracket_hi = 0;
  int evaluations = 0;
};

/// Newton solve of -1/2 Lap u + lambda = e^u on a circle or sphere geometry.
BranchPoint solve_el(double lambda, const ScalarField& init, const NewtonConfig& cfg);

/// Smallest eigenvalue of -1/2 Lap - lambda on fields orthogonal to constants
/// (the linearization at the constant branch u = log lambda).
double linearized_min_eigenvalue(const Geometry& geom, double lambda);

/// Sign change search on a uniform grid, bisection to relative width 1e-4,
/// then the affine zero of the final bracket.
BifurcationResult bifurcation_scan(const Geometry& geom, double lambda_min, double lambda_max, int steps);

/// sup |u - mean(u)| with the mean taken against the volume measure.
double distance_to_constant(const ScalarField& u);

}  // namespace onofri
