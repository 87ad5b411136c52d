#include "onofri/circle.hpp"
#include "onofri/constants.hpp"
#include "onofri/error.hpp"
#include "onofri/field_io.hpp"
#include "onofri/format.hpp"
#include "onofri/identities.hpp"
#include "onofri/sphere.hpp"
#include "onofri/weighted.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace onofri;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitArguments = 2;
constexpr int kExitCheckFailed = 3;

struct Common {
  std::string output;  // empty: stdout
  int jobs = 1;
  std::uint64_t seed = 7;
};

int effective_jobs(int flag) {
  if (const char* env = std::getenv("ONOFRI_LAB_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw Error(ErrorCode::InvalidParameter, "ONOFRI_LAB_JOBS must be a positive integer");
  }
  if (flag == 0) return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (flag < 0) throw Error(ErrorCode::InvalidParameter, "--jobs must be >= 0");
  return flag;
}

// Writes to --output when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw Error(ErrorCode::InvalidParameter, "cannot open output file '" + path + "'");
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

// Integral floats print as integers ({"d":2}, not {"d":2.0}).
json compact_numbers(const json& j) {
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = compact_numbers(it.value());
    return out;
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::trunc(v) && std::abs(v) < 1e15) return static_cast<std::int64_t>(v);
  }
  return j;
}

void emit_json(const Common& common, const json& j) {
  Sink sink(common.output);
  sink.os() << compact_numbers(j).dump() << "\n";
}

std::string fmt(double v) {
  return format_double(v);
}

struct GeometryFlags {
  int resolution = 0;  // 0: command default
  double period = 1;
  double radius = 1;
  std::string normalization = "unit-radius";
  double truncation = 20;
  double stretch = 1;
};

Geometry make_geometry(GeometryKind kind, const GeometryFlags& f, int default_resolution) {
  GeometryParams p;
  p.period = f.period;
  p.radius = f.radius;
  p.normalization = parse_normalization(f.normalization);
  p.truncation = f.truncation;
  p.stretch = f.stretch;
  return build_geometry(kind, f.resolution > 0 ? f.resolution : default_resolution, p);
}

void add_sphere_flags(CLI::App* cmd, GeometryFlags& g) {
  cmd->add_option("--radius", g.radius, "sphere radius a (unit-radius normalization)")->capture_default_str();
  cmd->add_option("--normalization", g.normalization, "unit-radius or unit-volume")
      ->check(CLI::IsMember({"unit-radius", "unit-volume"}))
      ->capture_default_str();
}

void add_plane_flags(CLI::App* cmd, GeometryFlags& g) {
  cmd->add_option("--truncation", g.truncation, "disk radius R (inf for the whole plane)")->capture_default_str();
  cmd->add_option("--stretch", g.stretch, "radial map length scale")->capture_default_str();
}

// "cos:A" (A cos of the first eigenfunction coordinate), "const:c", "legendre:c1,c2,..."
// (sphere coefficients of P_1, P_2, ...) or "file:path" (field CSV).
ScalarField parse_init(const Geometry& geom, const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw Error(ErrorCode::ParseError, "bad number '" + s + "' in init '" + spec + "'");
    return v;
  };
  if (head == "file") {
    ScalarField f = load_field(rest);
    if (!f.geometry().same_as(geom)) {
      throw Error(ErrorCode::GeometryMismatch, "init field geometry " + f.geometry().descriptor() + " differs from " +
                                                   geom.descriptor());
    }
    return f;
  }
  if (head == "const") return ScalarField::constant(geom, number(rest));
  if (head == "cos") {
    const double a = number(rest);
    if (geom.kind() == GeometryKind::Circle) {
      const double w = 2 * std::numbers::pi / geom.params().period;
      return ScalarField::sample(geom, [&](double x) { return a * std::cos(w * x); });
    }
    if (geom.kind() == GeometryKind::SphereZonal) {
      return ScalarField::sample(geom, [&](double th) { return a * std::cos(th); });
    }
  }
  if (head == "legendre" && geom.kind() == GeometryKind::SphereZonal) {
    std::vector<double> c{0.0};
    std::stringstream ss(rest);
    for (std::string item; std::getline(ss, item, ',');) c.push_back(number(item));
    return ScalarField::sample(geom, [&](double th) {
      return spectral::legendre_eval(Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())),
                                     std::cos(th));
    });
  }
  throw Error(ErrorCode::ParseError, "unknown init '" + spec + "' (cos:A, const:c, legendre:c1,..., file:path)");
}

struct ScanSpec {
  double lo = 0, hi = 0;
  int steps = 0;
};

ScanSpec parse_scan(const std::string& text) {
  ScanSpec s;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%d%c", &s.lo, &s.hi, &s.steps, &tail) != 3) {
    throw Error(ErrorCode::ParseError, "--scan expects a:b:n, got '" + text + "'");
  }
  return s;
}

template <typename Fn>
void run_indexed(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) fn(i);
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// constants

void setup_constants(CLI::App& app, Common& common, std::function<int()>& action) {
  auto* cmd = app.add_subcommand("constants", "closed-form constants of the Bakry-Emery type estimate");
  cmd->require_subcommand(1);
  static double d = 2, theta = 1, x = 0.5, rho = 1, lambda1 = 2;

  auto* t0 = cmd->add_subcommand("theta0", "theta_0(d), the smallest admissible theta, for 1 < d < 6");
  t0->add_option("--d", d, "dimension")->required();
  t0->callback([&] {
    action = [&] {
      emit_json(common, json{{"d", d}, {"theta0", constants::theta0(d)}});
      return kExitOk;
    };
  });

  auto* abc = cmd->add_subcommand("abc", "coefficients a, b, c of the quadratic form in the gradient terms");
  abc->add_option("--d", d, "dimension")->required();
  abc->add_option("--theta", theta, "interpolation parameter in [0, 1]")->capture_default_str();
  abc->callback([&] {
    action = [&] {
      const auto r = constants::abc_coefficients(d, theta);
      emit_json(common, json{{"d", d}, {"theta", theta}, {"a", r.a}, {"b", r.b}, {"c", r.c}});
      return kExitOk;
    };
  });

  auto* disc = cmd->add_subcommand("discriminant", "b^2 - 4ac and the sign of its factored form");
  disc->add_option("--d", d, "dimension")->required();
  disc->add_option("--theta", theta, "interpolation parameter in [0, 1]")->capture_default_str();
  disc->callback([&] {
    action = [&] {
      const auto r = constants::discriminant(d, theta);
      emit_json(common, json{{"d", d},
                             {"theta", theta},
                             {"delta", r.delta},
                             {"sign_form", r.sign_form},
                             {"sign", r.sign},
                             {"signs_agree", r.signs_agree}});
      return kExitOk;
    };
  });

  auto* font = cmd->add_subcommand("fontenas", "the two admissible-constant curves f1, f2 and their gap, 1 < d <= 2");
  font->add_option("--d", d, "dimension in (1, 2]")->required();
  font->add_option("--x", x, "parameter in [0, 1]")->required();
  font->callback([&] {
    action = [&] {
      emit_json(common, json{{"d", d},
                             {"x", x},
                             {"f1", constants::fontenas_f1(d, x)},
                             {"f2", constants::fontenas_f2(d, x)},
                             {"gap", constants::fontenas_gap(d, x)},
                             {"gap_closed_form", constants::fontenas_gap_closed_form(d, x)}});
      return kExitOk;
    };
  });

  auto* cb = cmd->add_subcommand("curvature-bound",
                                 "rigidity bound lambda_1 (1-theta)/2 + theta d rho / (2 (d-1)) and its optimum");
  cb->add_option("--d", d, "dimension")->required();
  cb->add_option("--rho", rho, "Ricci lower bound")->required();
  cb->add_option("--lambda1", lambda1, "first positive Laplace eigenvalue")->required();
  cb->add_option("--theta", theta, "theta in [theta_0(d), 1]")->capture_default_str();
  cb->callback([&] {
    action = [&] {
      const auto r = constants::curvature_rigidity_bound(d, rho, lambda1, theta);
      emit_json(common, json{{"d", d},
                             {"rho", rho},
                             {"lambda1", lambda1},
                             {"theta", theta},
                             {"bound", r.bound},
                             {"optimal_theta", r.optimal_theta},
                             {"optimal_bound", r.optimal_bound}});
      return kExitOk;
    };
  });
}

// ---------------------------------------------------------------------------
// spectrum

void setup_spectrum(CLI::App& app, Common& common, std::function<int()>& action) {
  auto* cmd = app.add_subcommand("spectrum", "Laplace-Beltrami spectra");
  cmd->require_subcommand(1);
  static std::string kind = "circle";
  static GeometryFlags g;
  auto* l1 = cmd->add_subcommand("lambda1", "first positive eigenvalue of -Laplacian");
  l1->add_option("--geometry", kind, "circle or sphere")->check(CLI::IsMember({"circle", "sphere"}))->required();
  l1->add_option("--resolution", g.resolution, "node count (default 256)");
  l1->add_option("--period", g.period, "circle length L")->capture_default_str();
  add_sphere_flags(l1, g);
  l1->callback([&] {
    action = [&] {
      const GeometryKind k = parse_geometry_kind(kind);
      const Geometry geom = make_geometry(k, g, 256);
      json j{{"geometry", to_string(k)}, {"resolution", geom.resolution()}};
      if (k == GeometryKind::SphereZonal) {
        j["normalization"] = g.normalization;
        j["radius"] = geom.sphere_radius();
      } else {
        j["period"] = g.period;
      }
      j["lambda1"] = first_eigenvalue(geom);
      emit_json(common, j);
      return kExitOk;
    };
  });
}

// ---------------------------------------------------------------------------
// rigidity

void setup_rigidity(CLI::App& app, Common& common, std::function<int()>& action) {
  auto* cmd = app.add_subcommand("rigidity", "solutions of -1/2 Lap u + lambda = e^u and the bifurcation threshold");
  cmd->require_subcommand(1);
  static std::vector<double> lambdas;
  static std::string scan, init;
  static int inits = 8;
  static double amplitude = 0.5, tol = 1e-10;
  static GeometryFlags g;
  static std::string which;

  for (const char* name : {"circle", "sphere"}) {
    const bool circle = std::string(name) == "circle";
    auto* sub = cmd->add_subcommand(
        name, circle ? "periodic solutions on the circle of length L; threshold 2 pi^2 / L^2"
                     : "zonal solutions on the sphere; threshold lambda_1 / 2");
    sub->add_option("--lambda", lambdas, "lambda values (comma separated)")->delimiter(',');
    sub->add_option("--scan", scan, "a:b:n, locate the linearized sign change on [a, b] with n grid steps");
    sub->add_option("--inits", inits, "random initial fields per lambda")->capture_default_str();
    sub->add_option("--amplitude", amplitude, "sup-norm of random initial perturbations")->capture_default_str();
    sub->add_option("--init", init, "fixed init added to log(lambda): cos:A, const:c, legendre:..., file:path");
    sub->add_option("--tol", tol, "Newton residual tolerance (sup norm)")->capture_default_str();
    sub->add_option("--resolution", g.resolution, circle ? "node count (default 256)" : "node count (default 64)");
    if (circle) {
      sub->add_option("--period", g.period, "circle length L")->capture_default_str();
    } else {
      add_sphere_flags(sub, g);
    }
    sub->callback([&, circle] {
      which = circle ? "circle" : "sphere";
      action = [&, circle] {
        const GeometryKind k = circle ? GeometryKind::Circle : GeometryKind::SphereZonal;
        const Geometry geom = make_geometry(k, g, circle ? 256 : 64);
        if (!scan.empty()) {
          const ScanSpec s = parse_scan(scan);
          const BifurcationResult r = circle ? bifurcation_scan_circle(geom, s.lo, s.hi, s.steps)
                                             : bifurcation_scan_sphere(geom, s.lo, s.hi, s.steps);
          emit_json(common, json{{"geometry", geom.descriptor()},
                                 {"lambda_c", r.lambda_c},
                                 {"bracket_lo", r.bracket_lo},
                                 {"bracket_hi", r.bracket_hi},
                                 {"evaluations", r.evaluations}});
          return kExitOk;
        }
        if (lambdas.empty()) throw Error(ErrorCode::InvalidParameter, "give --lambda or --scan");
        if (!(tol > 0)) throw Error(ErrorCode::InvalidParameter, "--tol must be positive");
        for (double lam : lambdas) {
          if (!(lam > 0)) throw Error(ErrorCode::DomainError, "lambda must be positive");
        }
        const int per = init.empty() ? inits : 1;
        if (per < 1) throw Error(ErrorCode::InvalidParameter, "--inits must be >= 1");
        const int total = static_cast<int>(lambdas.size()) * per;
        std::vector<std::string> rows(total);
        std::atomic<bool> diverged{false};
        NewtonConfig nc;
        nc.tol = tol;
        // Parse the fixed init up front so argument errors surface before any solve.
        std::optional<ScalarField> fixed;
        if (!init.empty()) fixed = parse_init(geom, init);
        run_indexed(total, effective_jobs(common.jobs), [&](int i) {
          const double lam = lambdas[i / per];
          const int trial = i % per;
          ScalarField start = fixed ? fixed->shifted(std::log(lam))
                                    : (random_field(geom, common.seed, trial) * amplitude).shifted(std::log(lam));
          std::string row = fmt(lam) + ",";
          try {
            const BranchPoint bp = solve_el(lam, start, nc);
            const double deficit = circle ? mto_deficit_circle(bp.solution, lam) : functional_F(bp.solution, lam);
            row += std::string(to_string(bp.branch_tag)) + "," + fmt(bp.newton_residual) + "," +
                   fmt(bp.distance_to_constant) + "," + fmt(deficit);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::NewtonDiverged) throw;
            diverged = true;
            row += "diverged,nan,nan,nan";
          }
          rows[i] = row;
        });
        Sink sink(common.output);
        sink.os() << "lambda,branch_tag,residual,distance_to_constant,deficit\n";
        for (const auto& r : rows) sink.os() << r << "\n";
        return diverged ? kExitNumerical : kExitOk;
      };
    });
  }
}

// ---------------------------------------------------------------------------
// lambda-star

void setup_lambda_star(CLI::App& app, Common& common, std::function<int()>& action) {
  auto* cmd = app.add_subcommand("lambda-star", "minimization of the rigidity quotient over zonal fields");
  cmd->require_subcommand(1);
  static GeometryFlags g;
  static OptimizerConfig oc;
  static std::string min_field_file;
  auto* sub = cmd->add_subcommand("sphere", "multistart projected descent; the value bounds the zonal infimum above");
  add_sphere_flags(sub, g);
  sub->add_option("--resolution", g.resolution, "node count (default 64)");
  sub->add_option("--seeds", oc.seeds, "multistart seeds")->capture_default_str();
  sub->add_option("--modes", oc.modes, "Legendre modes in the first stage")->capture_default_str();
  sub->add_option("--iterations", oc.max_iterations, "descent iterations per run")->capture_default_str();
  sub->add_option("--refinements", oc.refinements, "mode doublings after the multistart")->capture_default_str();
  sub->add_option("--min-field-file", min_field_file, "write the minimizing field as CSV");
  sub->callback([&] {
    action = [&] {
      const Geometry geom = make_geometry(GeometryKind::SphereZonal, g, 64);
      OptimizerConfig cfg = oc;
      cfg.seed = common.seed;
      cfg.jobs = effective_jobs(common.jobs);
      const LambdaStarEstimate est = minimize_lambda_star(geom, cfg);
      if (!min_field_file.empty()) save_field(min_field_file, est.minimizer);
      emit_json(common, json{{"normalization", g.normalization},
                             {"radius", geom.sphere_radius()},
                             {"estimate", est.value},
                             {"probe_count", est.probe_count},
                             {"stalled", est.stalled},
                             {"min_field_file", min_field_file}});
      return kExitOk;
    };
  });
}

// ---------------------------------------------------------------------------
// flow

void setup_flow(CLI::App& app, Common& common, std::function<int()>& action) {
  auto* cmd = app.add_subcommand("flow", "mass-preserving flow along which F decreases at rate G");
  cmd->require_subcommand(1);
  static GeometryFlags g;
  static double lambda = 1, t_final = 1;
  static std::string init = "cos:1";
  static FlowConfig fc;
  auto* sub = cmd->add_subcommand("sphere", "df/dt = (Lap f + |grad f|^2 / 2) e^{-f/2} on zonal fields");
  sub->add_option("--lambda", lambda, "lambda in F and G")->required();
  sub->add_option("--init", init, "cos:A, const:c, legendre:c1,..., file:path")->capture_default_str();
  sub->add_option("--t-final", t_final, "final time")->required();
  sub->add_option("--safety", fc.safety, "step factor in dt = s (pi a / N)^2 e^{min f / 2}")->capture_default_str();
  sub->add_option("--interval", fc.output_interval, "time between trace rows")->capture_default_str();
  sub->add_option("--resolution", g.resolution, "node count (default 32)");
  add_sphere_flags(sub, g);
  sub->callback([&] {
    action = [&] {
      const Geometry geom = make_geometry(GeometryKind::SphereZonal, g, 32);
      const FlowTrace tr = flow_evolve(parse_init(geom, init), lambda, t_final, fc);
      Sink sink(common.output);
      sink.os() << "t,F,G,mass,sup_f\n";
      for (std::size_t i = 0; i < tr.times.size(); ++i) {
        sink.os() << fmt(tr.times[i]) << "," << fmt(tr.F_values[i]) << "," << fmt(tr.G_values[i]) << ","
                  << fmt(tr.mass_values[i]) << "," << fmt(tr.sup_f[i]) << "\n";
      }
      return kExitOk;
    };
  });
}

// ---------------------------------------------------------------------------
// weights

json weight_json(const Weight& w) {
  const LambdaStarWeight ls = lambda_star_weight(w);
  return json{{"kind", to_string(w.spec.kind)},
              {"params", w.spec.text()},
              {"lambda_star", ls.value},
              {"inf_location_r", ls.inf_location_r},
              {"normalization_defect", w.normalization_defect}};
}

void write_profile(const std::string& path, const Weight& w) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidParameter, "cannot open profile file '" + path + "'");
  write_weight_profile_csv(os, w);
}

void setup_weights(CLI::App& app, Common& common, std::function<int()>& action) {
  auto* cmd = app.add_subcommand("weights", "radial probability weights on the plane");
  cmd->require_subcommand(1);
  static GeometryFlags g;
  static std::string spec = "stereographic", profile, field;
  static double mass = 4, epsilon = 0, amplitude = 0.05, lambda = 0.5, sigma = 0, tol = 1e-10;
  static int inits = 8;
  static double init_amplitude = 0.5;

  auto plane_opts = [&](CLI::App* sub, int default_n) {
    sub->add_option("--resolution", g.resolution, "node count (default " + std::to_string(default_n) + ")");
    add_plane_flags(sub, g);
  };

  auto* ls = cmd->add_subcommand("lambda-star", "inf of (-Lap log mu) / (8 pi mu), the weighted rigidity threshold");
  ls->add_option("--weight", spec,
                 "stereographic, gaussian:sigma, perturbed:A, keller-segel:M or ks-selfsim:M:eps")
      ->capture_default_str();
  ls->add_option("--profile", profile, "write r, mu, g, dg, lap_g as CSV");
  plane_opts(ls, 256);
  ls->callback([&, ls] {
    action = [&, ls] {
      const WeightSpec ws = parse_weight_spec(spec);
      GeometryFlags gf = g;
      const bool ks = ws.kind == WeightKind::KellerSegel || ws.kind == WeightKind::KsSelfSimilar;
      if (ks && !ls->count("--truncation")) gf.truncation = 12;
      if (ks && !ls->count("--stretch")) gf.stretch = 2;
      const Weight w = make_weight(ws, make_geometry(GeometryKind::PlaneRadial, gf, 256));
      write_profile(profile, w);
      emit_json(common, weight_json(w));
      return kExitOk;
    };
  });

  auto* ks = cmd->add_subcommand("solve-ks", "radial steady state -Lap c = eps x.grad c + M e^{c-|x|^2/2} / Z");
  ks->add_option("--mass", mass, "mass M in (0, 8 pi)")->required();
  ks->add_option("--epsilon", epsilon, "self-similar drift eps >= 0")->capture_default_str();
  ks->add_option("--profile", profile, "write r, mu, g, dg, lap_g as CSV");
  plane_opts(ks, 256);
  ks->callback([&, ks] {
    action = [&, ks] {
      GeometryFlags gf = g;
      if (!ks->count("--truncation")) gf.truncation = 12;
      if (!ks->count("--stretch")) gf.stretch = 2;
      const Weight w = solve_keller_segel(mass, epsilon, make_geometry(GeometryKind::PlaneRadial, gf, 256));
      write_profile(profile, w);
      json j = weight_json(w);
      j["recovered_mass"] = ks_recovered_mass(w);
      j["decomposition_defect"] = ks_decomposition_defect(w);
      j["iterations"] = w.iterations;
      j["final_update"] = w.update_history.empty() ? 0.0 : w.update_history.back();
      emit_json(common, j);
      return kExitOk;
    };
  });

  auto* pb = cmd->add_subcommand("perturbation",
                                 "lower bound e^{-Var h} (1 + inf (1+r^2)^2 Lap h / 8) for h = A / (1 + r^2)");
  pb->add_option("--amplitude", amplitude, "A")->capture_default_str();
  plane_opts(pb, 256);
  pb->callback([&] {
    action = [&] {
      const Geometry geom = make_geometry(GeometryKind::PlaneRadial, g, 256);
      const ScalarField h = ScalarField::sample(geom, [&](double r) { return amplitude / (1 + r * r); });
      const PerturbationBound r = perturbation_bound(h);
      emit_json(common, json{{"amplitude", amplitude},
                             {"variation", r.variation},
                             {"inf_weighted_lap", r.inf_weighted_lap},
                             {"bound", r.bound},
                             {"lambda_star", r.lambda_star},
                             {"consistent", r.consistent}});
      return r.consistent ? kExitOk : kExitCheckFailed;
    };
  });

  auto* el = cmd->add_subcommand("el", "radial solutions of -Lap u / (8 pi) + lambda mu - lambda e^u mu = 0");
  el->add_option("--weight", spec, "weight spec")->capture_default_str();
  el->add_option("--lambda", lambda, "lambda")->capture_default_str();
  el->add_option("--inits", inits, "random initial fields")->capture_default_str();
  el->add_option("--amplitude", init_amplitude, "sup-norm of random initial fields")->capture_default_str();
  el->add_option("--tol", tol, "Newton residual tolerance")->capture_default_str();
  plane_opts(el, 256);
  el->callback([&] {
    action = [&] {
      if (inits < 1) throw Error(ErrorCode::InvalidParameter, "--inits must be >= 1");
      const Weight w = make_weight(parse_weight_spec(spec), make_geometry(GeometryKind::PlaneRadial, g, 256));
      NewtonConfig nc;
      nc.tol = tol;
      std::vector<std::string> rows(inits);
      std::atomic<bool> diverged{false};
      run_indexed(inits, effective_jobs(common.jobs), [&](int i) {
        const ScalarField start = random_field(w.geometry, common.seed, i) * init_amplitude;
        std::string row = fmt(lambda) + ",";
        try {
          const BranchPoint bp = solve_el_weighted(lambda, w, start, nc);
          row += std::string(to_string(bp.branch_tag)) + "," + fmt(bp.newton_residual) + "," +
                 fmt(bp.distance_to_constant) + "," + fmt(onofri_deficit_weighted(w, bp.solution, lambda));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NewtonDiverged) throw;
          diverged = true;
          row += "diverged,nan,nan,nan";
        }
        rows[i] = row;
      });
      Sink sink(common.output);
      sink.os() << "lambda,branch_tag,residual,distance_to_constant,deficit\n";
      for (const auto& r : rows) sink.os() << r << "\n";
      return diverged ? kExitNumerical : kExitOk;
    };
  });

  auto* df = cmd->add_subcommand(
      "deficit", "(1/16 pi) int |grad u|^2 - lambda [log int e^u dmu - int u dmu] for a dilation or a field file");
  df->add_option("--weight", spec, "weight spec")->capture_default_str();
  df->add_option("--lambda", lambda, "lambda")->required();
  auto* dil = df->add_option("--dilation", sigma, "u = log of the dilated stereographic density ratio, scale sigma");
  auto* ff = df->add_option("--field", field, "field CSV on the plane geometry");
  dil->excludes(ff);
  plane_opts(df, 256);
  df->callback([&] {
    action = [&] {
      const Weight w = make_weight(parse_weight_spec(spec), make_geometry(GeometryKind::PlaneRadial, g, 256));
      std::optional<ScalarField> u;
      if (!field.empty()) {
        u = load_field(field);
        if (!u->geometry().same_as(w.geometry)) throw Error(ErrorCode::GeometryMismatch, "field geometry differs");
      } else if (sigma > 0) {
        u = dilation_field(w.geometry, sigma);
      } else {
        throw Error(ErrorCode::InvalidParameter, "give --dilation sigma > 0 or --field");
      }
      json j{{"weight", w.spec.text()}, {"lambda", lambda}, {"deficit", onofri_deficit_weighted(w, *u, lambda)}};
      try {
        j["capital_lambda"] = capital_lambda_quotient(w, *u);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ConstantField) throw;
        j["capital_lambda"] = nullptr;
      }
      emit_json(common, j);
      return kExitOk;
    };
  });
}

// ---------------------------------------------------------------------------
// identities

void setup_identities(CLI::App& app, Common& common, std::function<int()>& action) {
  auto* cmd = app.add_subcommand("identities", "integral and pointwise identities on random fields");
  cmd->require_subcommand(1);
  static SuiteConfig sc;
  static double tol = 0;
  auto* run = cmd->add_subcommand("run", "CSV: identity_id, geometry, seed, trial, lhs, rhs, rel_err, pass");
  run->add_option("--suite", sc.suite, "circle, sphere, plane or all")
      ->check(CLI::IsMember({"circle", "sphere", "plane", "all"}))
      ->required();
  run->add_option("--trials", sc.trials, "random fields per geometry")->capture_default_str();
  run->add_option("--tol", tol, "relative tolerance (default 1e-8 circle, 1e-7 sphere, 1e-5 plane)");
  run->add_option("--circle-resolution", sc.circle_resolution, "Fourier nodes")->capture_default_str();
  run->add_option("--sphere-resolution", sc.sphere_resolution, "Legendre nodes")->capture_default_str();
  run->add_option("--plane-resolution", sc.plane_resolution, "radial nodes")->capture_default_str();
  run->add_option("--plane-truncation", sc.plane_truncation, "disk radius R")->capture_default_str();
  run->callback([&, run] {
    action = [&, run] {
      sc.seed = common.seed;
      sc.jobs = effective_jobs(common.jobs);
      if (run->count("--tol") && !(tol > 0)) throw Error(ErrorCode::InvalidParameter, "--tol must be positive");
      std::vector<std::string> suites;
      if (sc.suite == "all") suites = {"circle", "sphere", "plane"};
      else suites = {sc.suite};
      std::vector<IdentityReport> reports;
      int failed = 0;
      double worst_tail = 0;
      for (const auto& s : suites) {
        SuiteConfig cfg = sc;
        cfg.suite = s;
        cfg.tol = tol > 0 ? tol : (s == "circle" ? 1e-8 : s == "sphere" ? 1e-7 : 1e-5);
        SuiteSummary sum = run_suite(cfg);
        failed += sum.failed;
        for (auto& r : sum.reports) {
          worst_tail = std::max(worst_tail, r.truncation_tail);
          reports.push_back(std::move(r));
        }
      }
      Sink sink(common.output);
      write_reports_csv(sink.os(), reports);
      std::cerr << "identities: " << reports.size() - failed << " passed, " << failed << " failed";
      if (worst_tail > 0) std::cerr << "; plane truncation tail estimate up to " << worst_tail << " (relative)";
      std::cerr << "\n";
      return failed ? kExitCheckFailed : kExitOk;
    };
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"onofri-lab: numerical checks for the Moser-Trudinger-Onofri inequality on the circle, the sphere and "
               "weighted planes"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI file with [section] key = value lines; flags take precedence");
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  Common common;
  app.add_option("--output", common.output, "write results to this file instead of stdout");
  app.add_option("--jobs", common.jobs, "worker threads, 0 for all cores (ONOFRI_LAB_JOBS overrides)")
      ->capture_default_str();
  app.add_option("--seed", common.seed, "random seed")->capture_default_str();

  std::function<int()> action;
  setup_constants(app, common, action);
  setup_spectrum(app, common, action);
  setup_rigidity(app, common, action);
  setup_lambda_star(app, common, action);
  setup_flow(app, common, action);
  setup_weights(app, common, action);
  setup_identities(app, common, action);

  // Global options are accepted after the subcommand words too.
  for (CLI::App* sub : app.get_subcommands({})) {
    sub->fallthrough();
    for (CLI::App* leaf : sub->get_subcommands({})) leaf->fallthrough();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitArguments;
  }
  try {
    return action ? action() : kExitArguments;
  } catch (const Error& e) {
    std::cerr << "onofri-lab: " << e.what() << "\n";
    return e.is_argument_error() ? kExitArguments : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "onofri-lab: " << e.what() << "\n";
    return kExitNumerical;
  }
}
