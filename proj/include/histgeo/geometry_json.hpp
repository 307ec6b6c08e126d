#pragma once

#include <string>

#include <json.hpp>

#include "histgeo/geometry.hpp"

namespace histgeo {

/// {"type": "Point", "coordinates": [x, y], "crs": "..."}; see docs/geometry-json.md.
nlohmann::json geometry_to_json(const Geometry& g);

/// Accepts the type names emitted by geometry_to_json plus the lower-case kind
/// names (point, polyline, ...). A missing "crs" member takes `default_crs`.
/// Throws GeometryError on malformed input.
Geometry geometry_from_json(const nlohmann::json& j, const std::string& default_crs = {});

}  // namespace histgeo
