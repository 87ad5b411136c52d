#include "onofri/field_io.hpp"

#include "onofri/error.hpp"
#include "onofri/format.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace onofri {

namespace {

double to_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "not a number: '" + s + "'");
  }
}

std::string fmt(double v) {
  return format_double(v);
}

}  // namespace

Geometry parse_geometry_descriptor(const std::string& text) {
  std::istringstream in(text);
  std::map<std::string, std::string> kv;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "bad descriptor token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  for (const char* key : {"kind", "N", "param"}) {
    if (!kv.count(key)) throw Error(ErrorCode::ParseError, std::string("descriptor lacks ") + key);
  }
  const GeometryKind kind = parse_geometry_kind(kv["kind"]);
  const int n = static_cast<int>(to_double(kv["N"]));
  const double p = to_double(kv["param"]);
  GeometryParams params;
  switch (kind) {
    case GeometryKind::Circle: params.period = p; break;
    case GeometryKind::SphereZonal:
      params.radius = p;
      if (kv.count("norm")) params.normalization = parse_normalization(kv["norm"]);
      break;
    case GeometryKind::PlaneRadial:
      params.truncation = p;
      if (kv.count("stretch")) params.stretch = to_double(kv["stretch"]);
      if (kv.count("modes")) params.max_modes = static_cast<int>(to_double(kv["modes"]));
      break;
  }
  return build_geometry(kind, n, params);
}

void write_field_csv(std::ostream& os, const ScalarField& field) {
  const Geometry& g = field.geometry();
  os << "#geom " << g.descriptor() << "\n";
  os << "coordinate,value\n";
  for (Eigen::Index j = 0; j < field.size(); ++j) {
    os << fmt(g.nodes()(j)) << "," << fmt(field.values()(j)) << "\n";
  }
}

ScalarField read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("#geom ", 0) != 0) {
    throw Error(ErrorCode::ParseError, "field file must start with '#geom '");
  }
  const Geometry geom = parse_geometry_descriptor(line.substr(6));
  Eigen::VectorXd values(geom.resolution());
  Eigen::Index count = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("coordinate", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::ParseError, "expected 'coordinate,value'");
    if (count >= values.size()) throw Error(ErrorCode::ParseError, "more rows than nodes");
    values(count++) = to_double(line.substr(comma + 1));
  }
  if (count != values.size()) throw Error(ErrorCode::ParseError, "row count does not match N");
  return ScalarField(geom, std::move(values));
}

void save_field(const std::string& path, const ScalarField& field) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidParameter, "cannot write " + path);
  write_field_csv(os, field);
}

ScalarField load_field(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::InvalidParameter, "cannot read " + path);
  return read_field_csv(is);
}

}  // namespace onofri
