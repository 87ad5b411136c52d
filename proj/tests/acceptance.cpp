// Acceptance run: one PASS/FAIL line per criterion, exit status 3 if any fails.

#include "onofri/circle.hpp"
#include "onofri/constants.hpp"
#include "onofri/error.hpp"
#include "onofri/identities.hpp"
#include "onofri/sphere.hpp"
#include "onofri/weighted.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

using namespace onofri;
using std::numbers::pi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Collects the sub-checks of one criterion into a single line.
class Criterion {
 public:
  void check(bool ok, const std::string& what) {
    ok_ = ok_ && ok;
    if (!detail_.empty()) detail_ += "; ";
    detail_ += (ok ? "" : "FAILED ") + what;
  }
  bool ok() const { return ok_; }
  const std::string& detail() const { return detail_; }

 private:
  bool ok_ = true;
  std::string detail_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string sci(double v) { return fmt("%.3g", v); }

int jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

Geometry plane(int n, double R, double stretch = 1) {
  GeometryParams p;
  p.truncation = R;
  p.stretch = stretch;
  return build_geometry(GeometryKind::PlaneRadial, n, p);
}

Geometry sphere(int n, SphereNormalization norm = SphereNormalization::UnitRadius) {
  GeometryParams p;
  p.normalization = norm;
  return build_geometry(GeometryKind::SphereZonal, n, p);
}

void first_eigenvalues(Criterion& c) {
  const double circle = first_eigenvalue(build_geometry(GeometryKind::Circle, 256));
  const double unit = first_eigenvalue(sphere(256));
  const double vol = first_eigenvalue(sphere(256, SphereNormalization::UnitVolume));
  const double e1 = std::abs(circle / (4 * pi * pi) - 1);
  const double e2 = std::abs(unit / 2 - 1);
  const double e3 = std::abs(vol / (8 * pi) - 1);
  c.check(e1 <= 1e-10, "circle rel err " + sci(e1));
  c.check(e2 <= 1e-8, "unit sphere rel err " + sci(e2));
  c.check(e3 <= 1e-8, "unit-volume sphere rel err " + sci(e3));
}

void closed_forms(Criterion& c) {
  namespace oc = onofri::constants;
  c.check(oc::theta0(2) == 1.0, "theta0(2) = " + fmt("%.17g", oc::theta0(2)));
  const double delta = oc::discriminant(2, 1).delta;
  c.check(std::abs(delta) <= 1e-14, "discriminant(2,1) = " + sci(delta));
  const auto k = oc::abc_coefficients(2, 1);
  const double e = std::max({std::abs(k.a - 0.5), std::abs(k.b + 0.5), std::abs(k.c - 0.125)});
  c.check(e <= 1e-14, "abc(2,1) max err " + sci(e));
  const double ratio = k.b / (2 * k.a);
  c.check(std::abs(ratio + 0.5) <= 1e-14, "b/2a = " + fmt("%.17g", ratio));
}

void fontenas(Criterion& c) {
  namespace oc = onofri::constants;
  double min_gap = kInf, worst = 0;
  for (int i = 0; i < 50; ++i) {
    const double d = 1 + (i + 1) / 50.0;
    for (int j = 0; j < 50; ++j) {
      const double x = j / 49.0;
      const double gap = oc::fontenas_gap(d, x);
      min_gap = std::min(min_gap, gap);
      worst = std::max(worst, std::abs(gap - oc::fontenas_gap_closed_form(d, x)));
    }
  }
  c.check(min_gap >= 0, "min gap " + sci(min_gap));
  c.check(worst <= 1e-12, "closed-form err " + sci(worst));
}

double worst_equality(const std::string& suite, int n, double tol) {
  SuiteConfig cfg;
  cfg.suite = suite;
  cfg.trials = 32;
  cfg.tol = tol;
  cfg.jobs = jobs();
  cfg.circle_resolution = cfg.sphere_resolution = cfg.plane_resolution = n;
  return run_suite(cfg).worst_equality_rel_err;
}

void identity_suites(Criterion& c) {
  struct Row {
    const char* suite;
    int n;
    double tol;
    int base;  // coarse resolution for the doubling test
  };
  for (const Row& r : {Row{"circle", 256, 1e-8, 16}, Row{"sphere", 256, 1e-7, 12}, Row{"plane", 2048, 1e-5, 8}}) {
    SuiteConfig cfg;
    cfg.suite = r.suite;
    cfg.trials = 32;
    cfg.tol = r.tol;
    cfg.jobs = jobs();
    cfg.circle_resolution = cfg.sphere_resolution = cfg.plane_resolution = r.n;
    const SuiteSummary s = run_suite(cfg);
    int eq_failed = 0;
    double tail = 0;
    for (const auto& rep : s.reports) {
      if (!rep.inequality && !rep.pass) ++eq_failed;
      tail = std::max(tail, rep.truncation_tail);
    }
    std::string what = std::string(r.suite) + " " + std::to_string(s.passed) + "/" +
                       std::to_string(s.passed + s.failed) + " pass, worst " + sci(s.worst_equality_rel_err);
    if (tail > 0) what += " (tail estimate " + sci(tail) + ")";
    c.check(eq_failed == 0 && s.failed == 0, what);
    const double coarse = worst_equality(r.suite, r.base, r.tol);
    const double fine = worst_equality(r.suite, 2 * r.base, r.tol);
    const double gain = coarse / std::max(fine, 1e-300);
    c.check(gain >= 100, std::string(r.suite) + " doubling " + std::to_string(r.base) + "->" +
                             std::to_string(2 * r.base) + " gain " + sci(gain));
  }
}

void circle_rigidity(Criterion& c) {
  const Geometry g = build_geometry(GeometryKind::Circle, 256);
  const BifurcationResult b = bifurcation_scan_circle(g, 10, 30, 20);
  const double rel = std::abs(b.lambda_c / (2 * pi * pi) - 1);
  c.check(rel <= 5e-3, "lambda_c = " + fmt("%.10f", b.lambda_c) + " rel err " + sci(rel));
  const int inits = 64;
  for (double lambda : {1.0, 5.0, 10.0, 19.0}) {
    int constant = 0;
    for (int t = 0; t < inits; ++t) {
      try {
        const ScalarField init = (random_field(g, 7, t) * 0.5).shifted(std::log(lambda));
        if (solve_el_circle(lambda, init).branch_tag == BranchTag::Constant) ++constant;
      } catch (const Error&) {
      }
    }
    c.check(constant == inits, "lambda " + fmt("%g", lambda) + ": " + std::to_string(constant) + "/" +
                                   std::to_string(inits) + " constant");
  }
  const double lambda = 25;
  const ScalarField init = ScalarField::sample(g, [&](double x) { return std::log(lambda) + 0.5 * std::cos(2 * pi * x); });
  try {
    const BranchPoint p = solve_el_circle(lambda, init);
    c.check(p.branch_tag == BranchTag::Nonconstant && p.newton_residual <= 1e-8,
            "lambda 25: " + std::string(to_string(p.branch_tag)) + " residual " + sci(p.newton_residual));
  } catch (const Error& e) {
    c.check(false, std::string("lambda 25: ") + e.what());
  }
}

void circle_deficit(Criterion& c) {
  const Geometry g = build_geometry(GeometryKind::Circle, 256);
  const double lc = 2 * pi * pi;
  double worst = kInf;
  for (int t = 0; t < 100; ++t) {
    const double amplitude = (t + 1) / 100.0;
    worst = std::min(worst, mto_deficit_circle(random_field(g, 13, t) * amplitude, lc));
  }
  c.check(worst >= -1e-10, "min deficit at 2 pi^2 over 100 fields " + sci(worst));
  const ScalarField u = ScalarField::sample(g, [](double x) { return 1e-2 * std::cos(2 * pi * x); });
  const double d = mto_deficit_circle(u, 1.05 * lc);
  c.check(d < 0, "deficit at 1.05 * 2 pi^2 " + sci(d));
}

void lambda_star(Criterion& c) {
  OptimizerConfig cfg;
  cfg.jobs = jobs();
  const double unit = minimize_lambda_star(sphere(64), cfg).value;
  c.check(unit >= 0.98 && unit <= 1.02, "unit sphere " + fmt("%.8f", unit));
  const double vol = minimize_lambda_star(sphere(64, SphereNormalization::UnitVolume), cfg).value;
  c.check(vol >= 4 * pi * 0.98 && vol <= 4 * pi * 1.02, "unit volume / 4 pi " + fmt("%.8f", vol / (4 * pi)));
  const Geometry s = sphere(64);
  double worst = kInf;
  for (int t = 0; t < 100; ++t) worst = std::min(worst, lambda_star_quotient(random_field(s, 17, t)).value);
  c.check(worst >= 0.99, "min quotient over 100 probes " + fmt("%.6f", worst));
}

void flow(Criterion& c) {
  const Geometry s = sphere(32);
  const ScalarField u0 = ScalarField::sample(s, [](double th) { return std::cos(th); });
  const FlowTrace tr = flow_evolve(u0, 1, 5);
  const std::size_t n = tr.times.size();
  const double F0 = tr.F_values.front(), G0 = tr.G_values.front();
  double drift = 0, violation = 0, duality = 0;
  for (std::size_t i = 0; i < n; ++i) {
    drift = std::max(drift, std::abs(tr.mass_values[i] / tr.mass_values[0] - 1));
    if (i > 0) violation = std::max(violation, tr.F_values[i] - tr.F_values[i - 1]);
    if (i > 0 && i + 1 < n) {
      // centered difference at the interior trace points
      const double dF = (tr.F_values[i + 1] - tr.F_values[i - 1]) / (tr.times[i + 1] - tr.times[i - 1]);
      const double G = tr.G_values[i];
      duality = std::max(duality, std::abs(dF + G) / std::max(std::abs(G), 1e-6 * G0));
    }
  }
  const double remainder = std::abs(F0 - tr.G_integral.back() - tr.F_values.back());
  c.check(drift <= 1e-6, "mass drift " + sci(drift));
  c.check(violation <= 1e-10 * F0, "max F increase " + sci(violation));
  c.check(duality <= 1e-3, "|dF/dt + G| rel " + sci(duality));
  c.check(remainder <= 1e-4 * F0, "remainder " + sci(remainder / F0) + " F0");
}

void weight_thresholds(Criterion& c) {
  const Weight st = make_weight(parse_weight_spec("stereographic"), plane(256, 20));
  const double ls = lambda_star_weight(st).value;
  const double ratio_err = (weight_ratio(st).array() - 1).abs().maxCoeff();
  c.check(std::abs(ls - 1) <= 1e-6, "stereographic " + fmt("%.12f", ls));
  c.check(ratio_err <= 1e-8, "ratio - 1 sup " + sci(ratio_err));
  for (const char* spec : {"gaussian:0.5", "gaussian:1", "gaussian:2"}) {
    const double v = lambda_star_weight(make_weight(parse_weight_spec(spec), plane(256, 20))).value;
    c.check(std::abs(v - 0.5) <= 1e-8, std::string(spec) + " " + fmt("%.12f", v));
  }
}

void keller_segel(Criterion& c) {
  const Geometry g = plane(256, 12, 2);
  for (double M : {2.0, 4.0, 6.0}) {
    const Weight w = solve_keller_segel(M, 0, g);
    const double mass_err = std::abs(ks_recovered_mass(w) - M);
    const double defect = ks_decomposition_defect(w);
    c.check(mass_err <= 1e-6 && defect <= 1e-6,
            "M " + fmt("%g", M) + " mass err " + sci(mass_err) + " identity " + sci(defect));
  }
  const Weight s = solve_keller_segel(4, 0.5, g);
  const double defect = ks_decomposition_defect(s);
  c.check(defect <= 1e-6, "self-similar (4, 0.5) identity " + sci(defect));
}

void perturbation(Criterion& c) {
  const Geometry g = plane(256, 20);
  const PerturbationBound zero = perturbation_bound(ScalarField::constant(g, 0));
  c.check(zero.bound == 1.0 && zero.bound <= zero.lambda_star + 1e-8,
          "h = 0 bound " + fmt("%.17g", zero.bound) + " vs " + fmt("%.12f", zero.lambda_star));
  const PerturbationBound p = perturbation_bound(ScalarField::sample(g, [](double r) { return 0.05 / (1 + r * r); }));
  c.check(p.bound <= p.lambda_star + 1e-8,
          "h = 0.05/(1+r^2) bound " + fmt("%.8f", p.bound) + " <= " + fmt("%.8f", p.lambda_star));
}

void weighted_el(Criterion& c) {
  const Geometry g = plane(256, 20);
  const Weight w = make_weight(WeightSpec{}, g);
  const double res0 = weighted_el_residual(w, ScalarField::constant(g, 0), 0.5).cwiseAbs().maxCoeff();
  c.check(res0 <= 1e-12, "u = 0 residual " + sci(res0));
  int zero = 0;
  for (int t = 0; t < 8; ++t) {
    try {
      const BranchPoint b = solve_el_weighted(0.5, w, random_field(g, 7, t) * 0.5);
      if (b.branch_tag == BranchTag::Constant && b.solution.values().cwiseAbs().maxCoeff() <= 1e-6) ++zero;
    } catch (const Error&) {
    }
  }
  c.check(zero == 8, std::to_string(zero) + "/8 inits reach u = 0");
  // dilations on the whole plane; a disk of radius R adds an O(R^-2) mass defect
  const Geometry full = plane(256, kInf);
  const Weight wf = make_weight(WeightSpec{}, full);
  for (double sigma : {1.5, 2.0}) {
    const double d = onofri_deficit_weighted(wf, dilation_field(full, sigma), 1);
    c.check(d <= 1e-4, "sigma " + fmt("%g", sigma) + " deficit at 1: " + sci(d));
  }
  const double d = onofri_deficit_weighted(wf, dilation_field(full, 2), 1.1);
  c.check(d < 0, "sigma 2 deficit at 1.1: " + sci(d));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Criterion&)>>> criteria = {
      {"first eigenvalues", first_eigenvalues},
      {"closed-form constants at d = 2", closed_forms},
      {"Fontenas comparison", fontenas},
      {"identity suites", identity_suites},
      {"circle rigidity", circle_rigidity},
      {"circle MTO deficit", circle_deficit},
      {"lambda-star minimization", lambda_star},
      {"flow diagnostics", flow},
      {"weight thresholds", weight_thresholds},
      {"Keller-Segel profiles", keller_segel},
      {"perturbation bound", perturbation},
      {"weighted Euler-Lagrange", weighted_el},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Criterion c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.check(false, std::string("exception: ") + e.what());
    }
    if (!c.ok()) ++failed;
    std::printf("criterion %2zu %s  %s: %s\n", i + 1, c.ok() ? "PASS" : "FAIL", criteria[i].first, c.detail().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria pass\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 3;
}
