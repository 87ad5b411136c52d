#include "onofri/constants.hpp"
#include "onofri/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace onofri;
namespace oc = onofri::constants;

TEST_CASE("theta0 rational values") {
  CHECK(oc::theta0(2) == 1.0);
  CHECK(oc::theta0(1) == 0.0);
  CHECK(oc::theta0(3) == doctest::Approx(64.0 / 15).epsilon(1e-15));
  CHECK(oc::theta0(1.5) == doctest::Approx(4.0 / 15.75).epsilon(1e-15));
  CHECK_THROWS_AS(oc::theta0(6), Error);
  CHECK_THROWS_AS(oc::theta0(0.5), Error);
}

TEST_CASE("abc at d = 2, theta = 1") {
  const auto k = oc::abc_coefficients(2, 1);
  CHECK(std::abs(k.a - 0.5) < 1e-14);
  CHECK(std::abs(k.b + 0.5) < 1e-14);
  CHECK(std::abs(k.c - 0.125) < 1e-14);
  // b / 2a is the coefficient of the tensor term in the quotient
  CHECK(std::abs(k.b / (2 * k.a) + 0.5) < 1e-14);
  CHECK(std::abs(oc::discriminant(2, 1).delta) < 1e-14);
}

TEST_CASE("discriminant vanishes at theta0 and changes sign with it") {
  for (double d = 1.05; d < 5.95; d += 0.1) {
    const double t0 = oc::theta0(d);
    CHECK(std::abs(oc::discriminant(d, t0).delta) < 1e-13 * (1 + t0 * t0));
    for (double th : {0.25 * t0, 0.5 * t0, 1.5 * t0 + 0.1, 2 * t0 + 1}) {
      const auto disc = oc::discriminant(d, th);
      CHECK(disc.signs_agree);
      CHECK(disc.sign != 0);
    }
  }
}

TEST_CASE("Fontenas gap matches its closed form") {
  for (int i = 0; i < 50; ++i) {
    const double d = 1 + (i + 1) / 50.0;
    for (int j = 0; j < 50; ++j) {
      const double x = j / 49.0;
      const double gap = oc::fontenas_gap(d, x);
      CHECK(gap >= -1e-15);
      CHECK(std::abs(gap - oc::fontenas_gap_closed_form(d, x)) <= 1e-12);
    }
  }
  CHECK(oc::fontenas_gap(2, 0.3) == doctest::Approx(0).scale(1));
  CHECK_THROWS_AS(oc::fontenas_gap(2.5, 0.5), Error);
  CHECK_THROWS_AS(oc::fontenas_gap(1.5, 1.5), Error);
}

TEST_CASE("curvature bound") {
  // unit sphere: lambda1 = 2, rho = 1, so d/(d-1) rho = 2 = lambda1 and every theta gives 1
  const auto s = oc::curvature_rigidity_bound(2, 1, 2, 1);
  CHECK(s.bound == doctest::Approx(1));
  CHECK(s.optimal_bound == doctest::Approx(1));
  // large Ricci: theta = 1 is optimal
  const auto big = oc::curvature_rigidity_bound(1.5, 2, 1, 0.5);
  CHECK(big.optimal_theta == 1.0);
  CHECK(big.optimal_bound == doctest::Approx(0.5 * 3 * 2));
  CHECK(big.bound == doctest::Approx(0.25 + 0.25 * 3 * 2));
  // small Ricci: theta0 is optimal
  const auto small = oc::curvature_rigidity_bound(1.5, 0.1, 4, 1);
  CHECK(small.optimal_theta == doctest::Approx(oc::theta0(1.5)));
  CHECK_THROWS_AS(oc::curvature_rigidity_bound(3, 1, 1, 1), Error);
}

TEST_CASE("hand-evaluated examples") {
  CHECK(oc::abc_coefficients(3, 0).a == 0.0);
  CHECK(oc::discriminant(2, 0.5).sign == 1);
  CHECK(oc::discriminant(2, 0.5).sign_form == doctest::Approx(8));
  // d = 3: 16 * 4 - 3 * 5 = 49 > 0, the method fails
  CHECK(oc::discriminant(3, 1).sign == 1);
  CHECK(oc::discriminant(3, 1).sign_form == doctest::Approx(49));
  CHECK(oc::fontenas_f1(1.5, 0.5) == doctest::Approx(1 - 0.5 * 4 / 15.75).epsilon(1e-15));
  CHECK(oc::fontenas_f2(1.5, 0.5) == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(oc::fontenas_gap(1.5, 0.5) == doctest::Approx(0.875 - 1 + 2 / 15.75).epsilon(1e-13));
  for (double x : {0.0, 0.3, 1.0}) CHECK(oc::fontenas_f1(2, x) == doctest::Approx(x).scale(1));
  // rho = (d-1)/d lambda1 makes the bound independent of theta
  const double d = 1.6, l1 = 3;
  for (double th = oc::theta0(d); th <= 1; th += 0.1) {
    CHECK(oc::curvature_rigidity_bound(d, (d - 1) / d * l1, l1, th).bound == doctest::Approx(l1 / 2));
  }
  CHECK(oc::curvature_rigidity_bound(d, 0.7, l1, 1).bound == doctest::Approx(d / (2 * (d - 1)) * 0.7));
}
