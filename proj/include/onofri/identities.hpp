#pragma once

// Registry of the integral and pointwise identities behind the rigidity
// argument, assembled from a single DerivativeBundle per field.

#include "onofri/geometry.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace onofri {

enum class IdentityId {
  AlgHessianSplit,
  AlgMNorm,
  SphereBlwPointwise,
  SphereIbp,
  SphereBlwIntegral,
  PoincareSlack,
  CircleIntparts,
  CircleElIdentity,
  CircleSpectral,
  PlaneElim1,
  PlaneElim2,
  PlaneElim3,
  PlaneAbc,
  PlaneDE,
  PlaneIpp1,
  PlaneIpp2,
  PlaneDeltau2,
  PlaneIZero,
  PlaneFinal,
};

enum class IdentityNorm { Integral, PointwiseSup, MultiL2 };

struct IdentityInfo {
  IdentityId id;
  const char* name;
  unsigned geometries;  // bit mask over GeometryKind
  bool requires_el;
  bool inequality;      // lhs >= rhs
  IdentityNorm norm;
};

const std::vector<IdentityInfo>& identity_registry();
const IdentityInfo& identity_info(IdentityId id);
IdentityId parse_identity_id(const std::string& name);
bool identity_applies(IdentityId id, GeometryKind kind);

struct IdentityInput {
  explicit IdentityInput(ScalarField f) : field(std::move(f)) {}

  ScalarField field;
  std::optional<RadialWeightProfile> weight;  // required on the plane
  std::optional<double> el_lambda;            // set only for solver outputs
  std::optional<double> lambda1;              // first eigenvalue, computed if absent
  std::string provenance;
};

struct IdentityReport {
  IdentityId id = IdentityId::AlgHessianSplit;
  std::string name;
  double lhs = 0, rhs = 0, abs_err = 0, rel_err = 0, tol = 0;
  double truncation_tail = 0;  // relative tail estimate beyond a finite plane radius
  bool pass = false;
  bool inequality = false;
  std::string geometry;  // descriptor
  std::string context;   // field provenance
  std::uint64_t seed = 0;
  int trial = -1;
};

IdentityReport verify_identity(IdentityId id, const IdentityInput& input, double tol);

/// Band-limited random field with k^-4 coefficient decay, unit sup-norm
/// (plane fields carry the envelope (1+r^2)^-2).
ScalarField random_field(const Geometry& geom, std::uint64_t seed, int trial, int modes = 8);

struct SuiteConfig {
  std::string suite = "all";  // circle | sphere | plane | all
  int trials = 32;
  std::uint64_t seed = 7;
  double tol = 1e-8;
  int jobs = 1;
  int circle_resolution = 256;
  int sphere_resolution = 256;
  int plane_resolution = 2048;
  double plane_truncation = 20;
  double plane_perturbation = 0.5;  // amplitude of the perturbed weight
};

struct SuiteSummary {
  std::vector<IdentityReport> reports;
  int passed = 0, failed = 0;
  double worst_equality_rel_err = 0;
  double worst_inequality_rel_err = 0;
};

SuiteSummary run_suite(const SuiteConfig& cfg);

/// identity_id,geometry,seed,trial,lhs,rhs,rel_err,pass
void write_reports_csv(std::ostream& os, const std::vector<IdentityReport>& reports);

}  // namespace onofri
