#pragma once

// CSV serialization of scalar fields. The first line is
//   #geom kind=<kind> N=<n> param=<p> [norm=...] [stretch=...] [modes=...]
// followed by "coordinate,value" rows, one per node.

#include "onofri/geometry.hpp"

#include <iosfwd>
#include <string>

namespace onofri {

void write_field_csv(std::ostream& os, const ScalarField& field);
ScalarField read_field_csv(std::istream& is);

void save_field(const std::string& path, const ScalarField& field);
ScalarField load_field(const std::string& path);

/// Rebuilds a geometry from a "kind=... N=... param=..." descriptor.
Geometry parse_geometry_descriptor(const std::string& text);

}  // namespace onofri
