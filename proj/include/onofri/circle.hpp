#pragma once

// The one-dimensional problem on the circle of length L:
//   -1/2 u'' + lambda = e^u
// with bifurcation from the constant branch at lambda = 2 pi^2 / L^2.

#include "onofri/branch.hpp"
#include "onofri/geometry.hpp"

namespace onofri {

/// Newton solve on Fourier collocation. Throws NewtonDiverged.
BranchPoint solve_el_circle(double lambda, const ScalarField& init, const NewtonConfig& cfg = {});

/// Locates the sign change of the smallest linearized eigenvalue at the
/// constant branch. Throws NoSignChange.
BifurcationResult bifurcation_scan_circle(const Geometry& geom, double lambda_min, double lambda_max, int steps);

/// 1/4 int u'^2 + lambda avg(u) - lambda log avg(e^u).
double mto_deficit_circle(const ScalarField& u, double lambda);

}  // namespace onofri
