#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace histgeo {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct BBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool intersects(const BBox& o) const {
    return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

enum class GeometryKind { point, polyline, polygon, multipoint, multipolyline, multipolygon };

const char* to_string(GeometryKind kind);

class GeometryError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Planar geometry in meters.
///
/// Stored as a list of components, each a list of paths:
///   point / multipoint       -> one single-vertex path per component
///   polyline / multipolyline -> one vertex path per component
///   polygon / multipolygon   -> outer ring then holes per component, rings closed (first == last)
class Geometry {
public:
  using Path = std::vector<Point>;
  using Component = std::vector<Path>;

  Geometry() = default;

  static Geometry point(Point p, std::string crs = {});
  static Geometry polyline(Path vertices, std::string crs = {});
  static Geometry polygon(Path outer, std::vector<Path> holes = {}, std::string crs = {});
  static Geometry multipoint(Path points, std::string crs = {});
  static Geometry multipolyline(std::vector<Path> lines, std::string crs = {});
  /// Each entry is {outer, holes...}.
  static Geometry multipolygon(std::vector<Component> polygons, std::string crs = {});

  GeometryKind kind() const { return kind_; }
  const std::vector<Component>& components() const { return components_; }
  const std::string& crs() const { return crs_; }
  Geometry with_crs(std::string crs) const;
  bool empty() const { return components_.empty(); }

  friend bool operator==(const Geometry&, const Geometry&) = default;

private:
  GeometryKind kind_ = GeometryKind::point;
  std::vector<Component> components_;
  std::string crs_;
};

/// Number of segments used to approximate a full circle in buffer().
inline constexpr int kCircleSegments = 64;

/// Polygon covering every point within `radius` of `g`; radius 0 returns `g`.
Geometry buffer(const Geometry& g, double radius);

/// Planar area in m^2; zero for points and polylines.
double area(const Geometry& g);

/// Minimal Euclidean distance between the point sets, 0 when they intersect.
/// Throws GeometryError when the reference systems differ.
double distance(const Geometry& g1, const Geometry& g2);

BBox bbox(const Geometry& g);

/// A single point standing for the geometry: the point itself, the mean of a
/// multipoint, the half-length point of the longest line, or the area
/// centroid of the largest polygon.
Point representative_point(const Geometry& g);

}  // namespace histgeo
