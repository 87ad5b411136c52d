#include "onofri/error.hpp"
#include "onofri/weighted.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

using namespace onofri;
using std::numbers::pi;

namespace {

Geometry plane(int n, double R = std::numeric_limits<double>::infinity(), double stretch = 1) {
  GeometryParams p;
  p.truncation = R;
  p.stretch = stretch;
  return build_geometry(GeometryKind::PlaneRadial, n, p);
}

}  // namespace

TEST_CASE("weight spec parsing") {
  CHECK(parse_weight_spec("gaussian:2").sigma == 2);
  CHECK(parse_weight_spec("ks-selfsim:4:0.5").epsilon == 0.5);
  CHECK(parse_weight_spec("ks-selfsim:4:0.5").text() == "ks-selfsim:4:0.5");
  CHECK(parse_weight_spec("perturbed:0.05").text() == "perturbed:0.05");
  for (const char* bad : {"", "gauss:1", "gaussian:-1", "keller-segel:30", "keller-segel:x", "ks-selfsim:4"}) {
    CHECK_THROWS_AS(parse_weight_spec(bad), Error);
  }
}

TEST_CASE("stereographic weight: ratio identically one") {
  for (double R : {20.0, std::numeric_limits<double>::infinity()}) {
    const Weight w = make_weight(parse_weight_spec("stereographic"), plane(256, R));
    CHECK((weight_ratio(w).array() - 1).abs().maxCoeff() < 1e-8);
    CHECK(std::abs(lambda_star_weight(w).value - 1) < 1e-6);
  }
}

TEST_CASE("gaussian weight: ratio e^{r^2 / 2 sigma^2} / 2") {
  for (double sigma : {0.5, 1.0, 2.0}) {
    const Weight w = make_weight(parse_weight_spec("gaussian:" + std::to_string(sigma)), plane(256, 20));
    const Eigen::VectorXd ratio = weight_ratio(w);
    const Eigen::VectorXd& r = w.geometry.nodes();
    for (int j = 0; j < r.size(); ++j) {
      const double expect = 0.5 * std::exp(r(j) * r(j) / (2 * sigma * sigma));
      if (expect < 1e100) CHECK(std::abs(ratio(j) / expect - 1) < 1e-9);
    }
    CHECK(std::abs(lambda_star_weight(w).value - 0.5) < 1e-8);
  }
}

TEST_CASE("perturbed weight against the closed-form ratio") {
  const double A = 0.5;
  const Geometry g = plane(256);
  const Weight w = make_perturbed_weight(ScalarField::sample(g, [A](double r) { return A / (1 + r * r); }));
  // with s = 1/(1+r^2): ratio = (8 + 4A(1-2s)) e^{As} (1-e^{-A}) / (8A)
  auto ratio_of_s = [A](double s) { return (8 + 4 * A * (1 - 2 * s)) * std::exp(A * s) * (-std::expm1(-A)) / (8 * A); };
  const Eigen::VectorXd ratio = weight_ratio(w);
  for (int j = 0; j < ratio.size(); ++j) {
    const double s = 1 / (1 + g.nodes()(j) * g.nodes()(j));
    CHECK(std::abs(ratio(j) / ratio_of_s(s) - 1) < 1e-8);
  }
  double inf = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 100000; ++k) inf = std::min(inf, ratio_of_s(k / 100000.0));
  CHECK(std::abs(lambda_star_weight(w).value - inf) < 1e-8);
}

TEST_CASE("perturbation bound") {
  const Geometry g = plane(256);
  const PerturbationBound zero = perturbation_bound(ScalarField::constant(g, 0));
  CHECK(zero.bound == 1.0);
  CHECK(zero.consistent);
  const double A = 0.05;
  // (1+r^2)^2 Lap h = 4A (r^2-1)/(1+r^2), smallest at r = 0
  const PerturbationBound p = perturbation_bound(ScalarField::sample(g, [A](double r) { return A / (1 + r * r); }));
  CHECK(std::abs(p.variation - A) < 1e-12);
  CHECK(std::abs(p.inf_weighted_lap + 4 * A) < 1e-7);
  CHECK(std::abs(p.bound - std::exp(-A) * (1 - A / 2)) < 1e-8);
  CHECK(p.bound <= p.lambda_star + 1e-8);
  CHECK(perturbation_bound_value(0.1, -0.8) == doctest::Approx(std::exp(-0.1) * 0.9));
}

TEST_CASE("Keller-Segel steady states") {
  const Geometry g = plane(256, 12, 2);
  for (double M : {2.0, 6.0}) {
    const Weight w = solve_keller_segel(M, 0, g);
    CHECK(std::abs(ks_recovered_mass(w) - M) < 1e-6);
    CHECK(ks_decomposition_defect(w) < 1e-6);
    CHECK(integrate(g, w.profile.mu) == doctest::Approx(1).epsilon(1e-12));
    // -Lap c = n, compared with the spectral Laplacian of c
    const Eigen::VectorXd lap_c = differentiate(ScalarField(g, w.c)).lap;
    const Eigen::VectorXd n = M * w.profile.mu;
    CHECK((lap_c + n).cwiseAbs().maxCoeff() < 1e-7 * n.maxCoeff());
    // the threshold exceeds M / (8 pi) by inf 1/(4 pi mu), attained at the origin
    CHECK(lambda_star_weight(w).value > M / (8 * pi));
  }
  const Weight s = solve_keller_segel(4, 0.5, g);
  CHECK(std::abs(ks_recovered_mass(s) - 4) < 1e-6);
  CHECK(ks_decomposition_defect(s) < 1e-6);
  CHECK_THROWS_AS(solve_keller_segel(30, 0, g), Error);
  CHECK_THROWS_AS(ks_recovered_mass(make_weight(WeightSpec{}, g)), Error);
}

TEST_CASE("weighted Euler-Lagrange equation") {
  const Geometry g = plane(128, 20);
  const Weight w = make_weight(WeightSpec{}, g);
  CHECK(weighted_el_residual(w, ScalarField::constant(g, 0), 0.5).cwiseAbs().maxCoeff() <= 1e-12);
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::VectorXd init(g.resolution());
    for (int j = 0; j < init.size(); ++j) init(j) = 0.5 * std::cos(0.7 * (trial + 1) * g.nodes()(j)) / (1 + g.nodes()(j));
    const BranchPoint b = solve_el_weighted(0.5, w, ScalarField(g, init));
    CHECK(b.branch_tag == BranchTag::Constant);
    CHECK(b.newton_residual < 1e-9);
  }
}

TEST_CASE("dilations of the stereographic density") {
  // whole plane: on a disk of radius R the deficit carries an O(R^-2) mass defect
  const Geometry g = plane(256);
  const Weight w = make_weight(WeightSpec{}, g);
  for (double sigma : {1.5, 2.0}) {
    const ScalarField u = dilation_field(g, sigma);
    CHECK(std::abs(u.values()(0) - (2 * std::log(sigma) + 2 * std::log(1 + g.nodes()(0) * g.nodes()(0)) -
                                     2 * std::log(1 + sigma * sigma * g.nodes()(0) * g.nodes()(0)))) < 1e-13);
    CHECK(std::abs(onofri_deficit_weighted(w, u, 1)) <= 1e-12);
    CHECK(capital_lambda_quotient(w, u) == doctest::Approx(1).epsilon(1e-8));
  }
  CHECK(onofri_deficit_weighted(w, dilation_field(g, 2), 1.1) < 0);
  // on a disk the defect shrinks by a factor 4 each time R doubles
  double prev = 0;
  for (double R : {20.0, 40.0, 80.0}) {
    const Geometry d = plane(256, R);
    const double def = onofri_deficit_weighted(make_weight(WeightSpec{}, d), dilation_field(d, 2), 1);
    if (prev > 0) CHECK(prev / def == doctest::Approx(4).epsilon(0.02));
    prev = def;
  }
  std::ostringstream os;
  write_weight_profile_csv(os, w);
  CHECK(os.str().rfind("r,mu,g,dg,lap_g\n", 0) == 0);
}

TEST_CASE("hand-evaluated weight examples") {
  const Geometry g = plane(256, 20);
  const Weight st = make_weight(WeightSpec{}, g);
  CHECK(st.ratio_origin == doctest::Approx(1));
  const Weight ga = make_weight(parse_weight_spec("gaussian:1"), g);
  CHECK((ga.profile.lap_g.array() + 2).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(make_weight(parse_weight_spec("keller-segel:" + std::to_string(9 * pi)), g), Error);
  CHECK(perturbation_bound_value(0.1, -0.2) == doctest::Approx(std::exp(-0.1) * 0.975).epsilon(1e-15));

  // small mass: c -> 0 and mu approaches the unit gaussian density
  const Geometry k = plane(256, 12, 2);
  const Weight small = solve_keller_segel(0.01, 0, k);
  const Eigen::VectorXd& r = k.nodes();
  const Eigen::VectorXd gauss = ((-0.5 * r.array().square()).exp() / (2 * pi)).matrix();
  CHECK((small.profile.mu - gauss).cwiseAbs().maxCoeff() <= 1e-2);
  // the threshold is M/(8 pi) + 1/(4 pi mu(0))
  const Weight ks = solve_keller_segel(4, 0, k);
  const double mu0 = std::exp(k.legendre().evaluate(k.legendre().to_coeffs(ks.profile.g), 1.0));
  CHECK(lambda_star_weight(ks).value == doctest::Approx(4 / (8 * pi) + 1 / (4 * pi * mu0)).epsilon(1e-8));
}

TEST_CASE("capital Lambda quotient and deficit") {
  const Geometry g = plane(256, 20);
  const Weight st = make_weight(WeightSpec{}, g);
  CHECK_THROWS_AS(capital_lambda_quotient(st, ScalarField::constant(g, 1)), Error);
  CHECK(std::abs(onofri_deficit_weighted(st, ScalarField::constant(g, 1), 0.7)) < 1e-12);
  const double L = capital_lambda_quotient(st, ScalarField::sample(g, [](double r) { return 1e-4 * std::log(1 + r * r); }));
  CHECK(L >= 1 - 1e-12);
  CHECK(L <= 1 + 1e-6);
  // radial fields: Lambda(u) >= Lambda_star for any weight
  for (const char* spec : {"gaussian:1", "perturbed:0.5"}) {
    const Weight w = make_weight(parse_weight_spec(spec), g);
    const double ls = lambda_star_weight(w).value;
    for (int t = 0; t < 20; ++t) {
      Eigen::VectorXd u(g.resolution());
      for (int j = 0; j < u.size(); ++j) {
        const double s = 1 / (1 + g.nodes()(j) * g.nodes()(j));
        u(j) = std::sin((t + 1) * 0.9 * s) + 0.3 * std::cos((t % 5 + 2) * s * s);
      }
      CHECK(capital_lambda_quotient(w, ScalarField(g, u)) >= ls - 1e-10);
    }
  }
}
