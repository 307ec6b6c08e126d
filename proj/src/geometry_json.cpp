#include "histgeo/geometry_json.hpp"

namespace histgeo {

using nlohmann::json;

namespace {

json point_json(Point p) { return json::array({p.x, p.y}); }

json path_json(const Geometry::Path& path) {
  json out = json::array();
  for (const auto& p : path) out.push_back(point_json(p));
  return out;
}

json rings_json(const Geometry::Component& rings) {
  json out = json::array();
  for (const auto& ring : rings) out.push_back(path_json(ring));
  return out;
}

Point read_point(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw GeometryError("coordinate must be a [x, y] number pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Geometry::Path read_path(const json& j) {
  if (!j.is_array()) throw GeometryError("expected an array of coordinates");
  Geometry::Path path;
  path.reserve(j.size());
  for (const auto& p : j) path.push_back(read_point(p));
  return path;
}

std::vector<Geometry::Path> read_paths(const json& j) {
  if (!j.is_array()) throw GeometryError("expected an array of coordinate arrays");
  std::vector<Geometry::Path> paths;
  for (const auto& p : j) paths.push_back(read_path(p));
  return paths;
}

Geometry read_polygon(const json& j, const std::string& crs) {
  auto rings = read_paths(j);
  if (rings.empty()) throw GeometryError("polygon needs an outer ring");
  Geometry::Path outer = std::move(rings.front());
  rings.erase(rings.begin());
  return Geometry::polygon(std::move(outer), std::move(rings), crs);
}

}  // namespace

json geometry_to_json(const Geometry& g) {
  json out;
  const auto& comps = g.components();
  switch (g.kind()) {
    case GeometryKind::point:
      out["type"] = "Point";
      out["coordinates"] = point_json(comps[0][0][0]);
      break;
    case GeometryKind::polyline:
      out["type"] = "LineString";
      out["coordinates"] = path_json(comps[0][0]);
      break;
    case GeometryKind::polygon:
      out["type"] = "Polygon";
      out["coordinates"] = rings_json(comps[0]);
      break;
    case GeometryKind::multipoint: {
      out["type"] = "MultiPoint";
      json coords = json::array();
      for (const auto& c : comps) coords.push_back(point_json(c[0][0]));
      out["coordinates"] = std::move(coords);
      break;
    }
    case GeometryKind::multipolyline: {
      out["type"] = "MultiLineString";
      json coords = json::array();
      for (const auto& c : comps) coords.push_back(path_json(c[0]));
      out["coordinates"] = std::move(coords);
      break;
    }
    case GeometryKind::multipolygon: {
      out["type"] = "MultiPolygon";
      json coords = json::array();
      for (const auto& c : comps) coords.push_back(rings_json(c));
      out["coordinates"] = std::move(coords);
      break;
    }
  }
  if (!g.crs().empty()) out["crs"] = g.crs();
  return out;
}

Geometry geometry_from_json(const json& j, const std::string& default_crs) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string() || !j.contains("coordinates")) {
    throw GeometryError("geometry must be an object with 'type' and 'coordinates'");
  }
  std::string crs = default_crs;
  if (j.contains("crs")) {
    if (!j["crs"].is_string()) throw GeometryError("geometry 'crs' must be a string");
    crs = j["crs"].get<std::string>();
  }
  const auto type = j["type"].get<std::string>();
  const json& coords = j["coordinates"];
  if (type == "Point" || type == "point") return Geometry::point(read_point(coords), crs);
  if (type == "LineString" || type == "polyline") return Geometry::polyline(read_path(coords), crs);
  if (type == "Polygon" || type == "polygon") return read_polygon(coords, crs);
  if (type == "MultiPoint" || type == "multipoint") return Geometry::multipoint(read_path(coords), crs);
  if (type == "MultiLineString" || type == "multipolyline") return Geometry::multipolyline(read_paths(coords), crs);
  if (type == "MultiPolygon" || type == "multipolygon") {
    if (!coords.is_array()) throw GeometryError("expected an array of polygons");
    std::vector<Geometry::Component> polygons;
    for (const auto& poly : coords) polygons.push_back(read_paths(poly));
    return Geometry::multipolygon(std::move(polygons), crs);
  }
  throw GeometryError("unknown geometry type '" + type + "'");
}

}  // namespace histgeo
