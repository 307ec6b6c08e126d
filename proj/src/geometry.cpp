#include "histgeo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/multi_linestring.hpp>
#include <boost/geometry/geometries/multi_point.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>

namespace histgeo {

namespace bg = boost::geometry;

const char* to_string(GeometryKind kind) {
  switch (kind) {
    case GeometryKind::point: return "point";
    case GeometryKind::polyline: return "polyline";
    case GeometryKind::polygon: return "polygon";
    case GeometryKind::multipoint: return "multipoint";
    case GeometryKind::multipolyline: return "multipolyline";
    case GeometryKind::multipolygon: return "multipolygon";
  }
  return "unknown";
}

namespace {

bool finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

void require_finite(const Geometry::Path& path) {
  for (const auto& p : path) {
    if (!finite(p)) throw GeometryError("geometry coordinates must be finite");
  }
}

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

int orientation(Point o, Point a, Point b) {
  const double v = cross(o, a, b);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(Point p, Point s0, Point s1) {
  return std::min(s0.x, s1.x) <= p.x && p.x <= std::max(s0.x, s1.x) && std::min(s0.y, s1.y) <= p.y &&
         p.y <= std::max(s0.y, s1.y);
}

bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  const int o1 = orientation(p1, p2, q1), o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1), o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(q1, p1, p2)) return true;
  if (o2 == 0 && on_segment(q2, p1, p2)) return true;
  if (o3 == 0 && on_segment(p1, q1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

double point_segment_distance(Point p, Point s0, Point s1) {
  const double dx = s1.x - s0.x, dy = s1.y - s0.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - s0.x) * dx + (p.y - s0.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (s0.x + t * dx), p.y - (s0.y + t * dy));
}

double segment_distance(Point p1, Point p2, Point q1, Point q2) {
  if (segments_intersect(p1, p2, q1, q2)) return 0.0;
  return std::min({point_segment_distance(p1, q1, q2), point_segment_distance(p2, q1, q2),
                   point_segment_distance(q1, p1, p2), point_segment_distance(q2, p1, p2)});
}

double signed_ring_area(const Geometry::Path& ring) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) s += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
  return 0.5 * s;
}

bool in_ring(Point p, const Geometry::Path& ring) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Point a = ring[i], b = ring[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

bool in_polygon(Point p, const Geometry::Component& rings) {
  if (!in_ring(p, rings.front())) return false;
  for (std::size_t h = 1; h < rings.size(); ++h) {
    if (in_ring(p, rings[h])) return false;
  }
  return true;
}

Geometry::Path close_ring(Geometry::Path ring) {
  require_finite(ring);
  ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
  if (!ring.empty() && !(ring.front() == ring.back())) ring.push_back(ring.front());
  std::vector<Point> distinct(ring.begin(), ring.end() - (ring.empty() ? 0 : 1));
  std::sort(distinct.begin(), distinct.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw GeometryError("polygon ring needs at least 3 distinct vertices");
  if (signed_ring_area(ring) == 0.0) throw GeometryError("polygon ring has zero area");
  return ring;
}

void require_simple(const Geometry::Path& ring) {
  const std::size_t n = ring.size() - 1;  // edge count
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1])) {
        throw GeometryError("polygon outer ring self-intersects");
      }
    }
  }
}

Geometry::Component make_polygon(Geometry::Path outer, std::vector<Geometry::Path> holes) {
  Geometry::Component rings;
  rings.push_back(close_ring(std::move(outer)));
  require_simple(rings.front());
  for (auto& h : holes) rings.push_back(close_ring(std::move(h)));
  return rings;
}

}  // namespace

Geometry Geometry::point(Point p, std::string crs) {
  if (!finite(p)) throw GeometryError("geometry coordinates must be finite");
  Geometry g;
  g.kind_ = GeometryKind::point;
  g.components_ = {{{p}}};
  g.crs_ = std::move(crs);
  return g;
}

Geometry Geometry::polyline(Path vertices, std::string crs) {
  require_finite(vertices);
  if (vertices.size() < 2) throw GeometryError("polyline needs at least 2 vertices");
  Geometry g;
  g.kind_ = GeometryKind::polyline;
  g.components_ = {{std::move(vertices)}};
  g.crs_ = std::move(crs);
  return g;
}

Geometry Geometry::polygon(Path outer, std::vector<Path> holes, std::string crs) {
  Geometry g;
  g.kind_ = GeometryKind::polygon;
  g.components_ = {make_polygon(std::move(outer), std::move(holes))};
  g.crs_ = std::move(crs);
  return g;
}

Geometry Geometry::multipoint(Path points, std::string crs) {
  require_finite(points);
  if (points.empty()) throw GeometryError("multipoint needs at least 1 point");
  Geometry g;
  g.kind_ = GeometryKind::multipoint;
  for (const auto& p : points) g.components_.push_back({{p}});
  g.crs_ = std::move(crs);
  return g;
}

Geometry Geometry::multipolyline(std::vector<Path> lines, std::string crs) {
  if (lines.empty()) throw GeometryError("multipolyline needs at least 1 line");
  Geometry g;
  g.kind_ = GeometryKind::multipolyline;
  for (auto& line : lines) {
    require_finite(line);
    if (line.size() < 2) throw GeometryError("polyline needs at least 2 vertices");
    g.components_.push_back({std::move(line)});
  }
  g.crs_ = std::move(crs);
  return g;
}

Geometry Geometry::multipolygon(std::vector<Component> polygons, std::string crs) {
  if (polygons.empty()) throw GeometryError("multipolygon needs at least 1 polygon");
  Geometry g;
  g.kind_ = GeometryKind::multipolygon;
  for (auto& rings : polygons) {
    if (rings.empty()) throw GeometryError("polygon needs an outer ring");
    Path outer = std::move(rings.front());
    std::vector<Path> holes(std::make_move_iterator(rings.begin() + 1), std::make_move_iterator(rings.end()));
    g.components_.push_back(make_polygon(std::move(outer), std::move(holes)));
  }
  g.crs_ = std::move(crs);
  return g;
}

Geometry Geometry::with_crs(std::string crs) const {
  Geometry g = *this;
  g.crs_ = std::move(crs);
  return g;
}

double area(const Geometry& g) {
  if (g.kind() != GeometryKind::polygon && g.kind() != GeometryKind::multipolygon) return 0.0;
  double total = 0.0;
  for (const auto& rings : g.components()) {
    total += std::abs(signed_ring_area(rings.front()));
    for (std::size_t h = 1; h < rings.size(); ++h) total -= std::abs(signed_ring_area(rings[h]));
  }
  return std::max(0.0, total);
}

BBox bbox(const Geometry& g) {
  BBox box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& comp : g.components()) {
    for (const auto& path : comp) {
      for (const auto& p : path) {
        box.min_x = std::min(box.min_x, p.x);
        box.min_y = std::min(box.min_y, p.y);
        box.max_x = std::max(box.max_x, p.x);
        box.max_y = std::max(box.max_y, p.y);
      }
    }
  }
  return box;
}

namespace {

bool is_areal(const Geometry& g) {
  return g.kind() == GeometryKind::polygon || g.kind() == GeometryKind::multipolygon;
}

bool any_vertex_inside(const Geometry& vertices_of, const Geometry& areal) {
  if (!is_areal(areal)) return false;
  for (const auto& comp : vertices_of.components()) {
    for (const auto& path : comp) {
      for (const auto& p : path) {
        for (const auto& rings : areal.components()) {
          if (in_polygon(p, rings)) return true;
        }
      }
    }
  }
  return false;
}

template <typename Fn>
void for_each_segment(const Geometry& g, Fn&& fn) {
  for (const auto& comp : g.components()) {
    for (const auto& path : comp) {
      if (path.size() == 1) {
        fn(path[0], path[0]);
        continue;
      }
      for (std::size_t i = 0; i + 1 < path.size(); ++i) fn(path[i], path[i + 1]);
    }
  }
}

}  // namespace

double distance(const Geometry& g1, const Geometry& g2) {
  if (g1.crs() != g2.crs()) {
    throw GeometryError("reference system mismatch: '" + g1.crs() + "' vs '" + g2.crs() + "'");
  }
  if (any_vertex_inside(g1, g2) || any_vertex_inside(g2, g1)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for_each_segment(g1, [&](Point a0, Point a1) {
    for_each_segment(g2, [&](Point b0, Point b1) { best = std::min(best, segment_distance(a0, a1, b0, b1)); });
  });
  return best;
}

namespace {

using BPoint = bg::model::d2::point_xy<double>;
using BLine = bg::model::linestring<BPoint>;
using BPolygon = bg::model::polygon<BPoint, false, true>;
using BMultiPoint = bg::model::multi_point<BPoint>;
using BMultiLine = bg::model::multi_linestring<BLine>;
using BMultiPolygon = bg::model::multi_polygon<BPolygon>;

BPolygon to_boost_polygon(const Geometry::Component& rings) {
  BPolygon poly;
  for (const auto& p : rings.front()) bg::append(poly.outer(), BPoint(p.x, p.y));
  for (std::size_t h = 1; h < rings.size(); ++h) {
    poly.inners().emplace_back();
    for (const auto& p : rings[h]) bg::append(poly.inners().back(), BPoint(p.x, p.y));
  }
  bg::correct(poly);
  return poly;
}

Geometry from_boost(const BMultiPolygon& mp, const std::string& crs) {
  std::vector<Geometry::Component> polygons;
  for (const auto& poly : mp) {
    Geometry::Component rings;
    Geometry::Path outer;
    for (const auto& p : poly.outer()) outer.push_back({p.x(), p.y()});
    rings.push_back(std::move(outer));
    for (const auto& inner : poly.inners()) {
      Geometry::Path hole;
      for (const auto& p : inner) hole.push_back({p.x(), p.y()});
      rings.push_back(std::move(hole));
    }
    polygons.push_back(std::move(rings));
  }
  if (polygons.size() == 1) {
    auto rings = std::move(polygons.front());
    Geometry::Path outer = std::move(rings.front());
    std::vector<Geometry::Path> holes(rings.begin() + 1, rings.end());
    return Geometry::polygon(std::move(outer), std::move(holes), crs);
  }
  return Geometry::multipolygon(std::move(polygons), crs);
}

template <typename BoostGeometry>
BMultiPolygon buffered(const BoostGeometry& geom, double radius) {
  const bg::strategy::buffer::distance_symmetric<double> distance_strategy(radius);
  const bg::strategy::buffer::join_round join_strategy(kCircleSegments);
  const bg::strategy::buffer::end_round end_strategy(kCircleSegments);
  const bg::strategy::buffer::point_circle circle_strategy(kCircleSegments);
  const bg::strategy::buffer::side_straight side_strategy;
  BMultiPolygon out;
  bg::buffer(geom, out, distance_strategy, side_strategy, join_strategy, end_strategy, circle_strategy);
  return out;
}

}  // namespace

Geometry buffer(const Geometry& g, double radius) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw GeometryError("buffer radius must be a finite value >= 0");
  if (radius == 0.0) return g;

  BMultiPolygon out;
  switch (g.kind()) {
    case GeometryKind::point:
    case GeometryKind::multipoint: {
      BMultiPoint mp;
      for (const auto& comp : g.components()) mp.emplace_back(comp[0][0].x, comp[0][0].y);
      out = buffered(mp, radius);
      break;
    }
    case GeometryKind::polyline:
    case GeometryKind::multipolyline: {
      BMultiLine ml;
      for (const auto& comp : g.components()) {
        BLine line;
        for (const auto& p : comp[0]) bg::append(line, BPoint(p.x, p.y));
        ml.push_back(std::move(line));
      }
      out = buffered(ml, radius);
      break;
    }
    case GeometryKind::polygon:
    case GeometryKind::multipolygon: {
      BMultiPolygon mp;
      for (const auto& comp : g.components()) mp.push_back(to_boost_polygon(comp));
      out = buffered(mp, radius);
      break;
    }
  }
  if (out.empty()) throw GeometryError("buffer produced an empty geometry");
  return from_boost(out, g.crs());
}

Point representative_point(const Geometry& g) {
  const auto& comps = g.components();
  switch (g.kind()) {
    case GeometryKind::point: return comps[0][0][0];
    case GeometryKind::multipoint: {
      Point sum{};
      for (const auto& c : comps) {
        sum.x += c[0][0].x;
        sum.y += c[0][0].y;
      }
      return {sum.x / static_cast<double>(comps.size()), sum.y / static_cast<double>(comps.size())};
    }
    case GeometryKind::polyline:
    case GeometryKind::multipolyline: {
      auto length = [](const Geometry::Path& path) {
        double len = 0.0;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) len += std::hypot(path[i + 1].x - path[i].x, path[i + 1].y - path[i].y);
        return len;
      };
      const Geometry::Path* longest = &comps[0][0];
      for (const auto& c : comps) {
        if (length(c[0]) > length(*longest)) longest = &c[0];
      }
      double remaining = 0.5 * length(*longest);
      for (std::size_t i = 0; i + 1 < longest->size(); ++i) {
        const Point a = (*longest)[i], b = (*longest)[i + 1];
        const double seg = std::hypot(b.x - a.x, b.y - a.y);
        if (seg >= remaining && seg > 0.0) {
          const double t = remaining / seg;
          return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
        }
        remaining -= seg;
      }
      return longest->back();
    }
    case GeometryKind::polygon:
    case GeometryKind::multipolygon: {
      const Geometry::Component* largest = &comps[0];
      double largest_area = -1.0;
      for (const auto& c : comps) {
        const double a = std::abs(signed_ring_area(c.front()));
        if (a > largest_area) {
          largest_area = a;
          largest = &c;
        }
      }
      double cx = 0.0, cy = 0.0, total = 0.0;
      for (std::size_t r = 0; r < largest->size(); ++r) {
        const auto& ring = (*largest)[r];
        const double sign_fix = (r == 0 ? 1.0 : -1.0) * (signed_ring_area(ring) >= 0.0 ? 1.0 : -1.0);
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
          const double f = (ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y) * sign_fix;
          cx += (ring[i].x + ring[i + 1].x) * f;
          cy += (ring[i].y + ring[i + 1].y) * f;
          total += f;
        }
      }
      return {cx / (3.0 * total), cy / (3.0 * total)};
    }
  }
  return {};
}

}  // namespace histgeo
