#pragma once

// Closed-form constants of the interpolation (theta) method and the
// curvature-dimension comparison functions.

namespace onofri::constants {

/// theta_0(d) = 16 (d-1)^2 / ((6-d)(d+2)), defined for 1 <= d < 6.
double theta0(double d);

struct AbcCoefficients {
  double a = 0, b = 0, c = 0;
  double d = 2, theta = 1;
};

AbcCoefficients abc_coefficients(double d, double theta);

struct Discriminant {
  double delta = 0;        // b^2 - 4ac
  double sign_form = 0;    // 16 (d-1)^2 - (6-d)(d+2) theta
  int sign = 0;            // sign of delta (0 within roundoff)
  int sign_form_sign = 0;  // sign of sign_form
  bool signs_agree = true;
};

Discriminant discriminant(double d, double theta);

double fontenas_f1(double d, double x);
double fontenas_f2(double d, double x);
/// f2 - f1 as a difference.
double fontenas_gap(double d, double x);
/// (d-1)^2 (d-2)^2 / ((6-d)(d+2)) (1-x).
double fontenas_gap_closed_form(double d, double x);

struct CurvatureBound {
  double bound = 0;          // lambda_1 (1-theta)/2 + (theta/2) d/(d-1) rho at the given theta
  double optimal_theta = 0;  // maximizer over [theta_0(d), 1]
  double optimal_bound = 0;
};

CurvatureBound curvature_rigidity_bound(double d, double rho, double lambda1, double theta);

}  // namespace onofri::constants
