#include "onofri/constants.hpp"

#include "onofri/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace onofri::constants {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::DomainError, what);
}

int sign_of(double v, double scale) {
  const double eps = 64 * 2.220446049250313e-16 * std::max(1.0, scale);
  if (v > eps) return 1;
  if (v < -eps) return -1;
  return 0;
}

}  // namespace

double theta0(double d) {
  require(std::isfinite(d) && d >= 1 && d < 6, "theta0 needs 1 <= d < 6");
  return 16 * (d - 1) * (d - 1) / ((6 - d) * (d + 2));
}

AbcCoefficients abc_coefficients(double d, double theta) {
  require(std::isfinite(d) && d > 1, "abc coefficients need d > 1");
  require(std::isfinite(theta), "theta must be finite");
  const double r = d / (d - 1);
  const double k = (1 - theta) / 8 + 3 * theta / 16 * r + 1.0 / 8;
  AbcCoefficients out;
  out.d = d;
  out.theta = theta;
  out.a = theta / 4 * r;
  out.b = -k * 2 * d / (d + 2);
  out.c = (k * 0.5 * d / (d + 2) - (1 - theta + 2 * theta * r) / 64) * r;
  return out;
}

Discriminant discriminant(double d, double theta) {
  const AbcCoefficients k = abc_coefficients(d, theta);
  Discriminant out;
  out.delta = k.b * k.b - 4 * k.a * k.c;
  out.sign_form = 16 * (d - 1) * (d - 1) - (6 - d) * (d + 2) * theta;
  out.sign = sign_of(out.delta, k.b * k.b + std::abs(4 * k.a * k.c));
  out.sign_form_sign = sign_of(out.sign_form, 16 * (d - 1) * (d - 1) + std::abs((6 - d) * (d + 2) * theta));
  out.signs_agree = out.sign == out.sign_form_sign;
  return out;
}

namespace {

void check_fontenas(double d, double x) {
  require(std::isfinite(d) && d > 1 && d <= 2, "Fontenas comparison needs 1 < d <= 2");
  require(std::isfinite(x) && x >= 0 && x <= 1, "Fontenas comparison needs 0 <= x <= 1");
}

}  // namespace

double fontenas_f1(double d, double x) {
  check_fontenas(d, x);
  const double t0 = theta0(d);
  return 1 - t0 + t0 * x;
}

double fontenas_f2(double d, double x) {
  check_fontenas(d, x);
  return d * (2 - d) + (d - 1) * (d - 1) * x;
}

double fontenas_gap(double d, double x) { return fontenas_f2(d, x) - fontenas_f1(d, x); }

double fontenas_gap_closed_form(double d, double x) {
  check_fontenas(d, x);
  return (d - 1) * (d - 1) * (d - 2) * (d - 2) / ((6 - d) * (d + 2)) * (1 - x);
}

CurvatureBound curvature_rigidity_bound(double d, double rho, double lambda1, double theta) {
  require(std::isfinite(d) && d > 1 && d < 6, "curvature bound needs 1 < d < 6");
  require(std::isfinite(lambda1) && lambda1 > 0, "curvature bound needs lambda1 > 0");
  require(std::isfinite(rho), "rho must be finite");
  const double t0 = theta0(d);
  // theta0 exceeds 1 for d > 2, leaving an empty range
  require(t0 <= 1 + 1e-15, "theta range [theta0(d), 1] is empty for this d");
  require(theta >= t0 - 1e-15 && theta <= 1 + 1e-15, "theta must lie in [theta0(d), 1]");
  auto value = [&](double t) { return 0.5 * lambda1 * (1 - t) + 0.5 * t * d / (d - 1) * rho; };
  CurvatureBound out;
  out.bound = value(theta);
  out.optimal_theta = rho * d / (d - 1) <= lambda1 ? t0 : 1.0;
  out.optimal_bound = value(out.optimal_theta);
  return out;
}

}  // namespace onofri::constants
