#include "onofri/circle.hpp"

#include "onofri/error.hpp"

#include <cmath>

namespace onofri {

namespace {

void require_circle(const Geometry& geom) {
  if (geom.kind() != GeometryKind::Circle) throw Error(ErrorCode::GeometryMismatch, "expected a circle geometry");
}

}  // namespace

BranchPoint solve_el_circle(double lambda, const ScalarField& init, const NewtonConfig& cfg) {
  require_circle(init.geometry());
  return solve_el(lambda, init, cfg);
}

BifurcationResult bifurcation_scan_circle(const Geometry& geom, double lambda_min, double lambda_max, int steps) {
  require_circle(geom);
  return bifurcation_scan(geom, lambda_min, lambda_max, steps);
}

double mto_deficit_circle(const ScalarField& u, double lambda) {
  const Geometry& geom = u.geometry();
  require_circle(geom);
  const double vol = geom.volume();
  // lambda avg(u) - lambda log avg(e^u) evaluated on u - max(u), which is shift free and cannot overflow.
  const Eigen::ArrayXd v = u.values().array() - u.values().maxCoeff();
  const double mean = integrate(geom, v.matrix()) / vol;
  const double log_avg_exp = std::log(integrate(geom, v.exp().matrix()) / vol);
  const DerivativeBundle b = differentiate(u);
  return 0.25 * integrate(geom, b.grad_sq) + lambda * (mean - log_avg_exp);
}

}  // namespace onofri
