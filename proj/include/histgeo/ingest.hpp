#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "histgeo/gazetteer.hpp"
#include "histgeo/geometry.hpp"
#include "histgeo/text.hpp"

namespace histgeo {

class IngestError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class FileFormat { delimited, json_features };

FileFormat parse_file_format(std::string_view text);

/// Which column (delimited) or property (json-features) feeds each field.
///
/// Keys: historical_name (required), normalized_name, geometry (GeoJSON-like
/// text), x and y (point coordinates, instead of geometry), period, accuracy,
/// delimiter. A json-features file takes its geometry from the feature unless
/// x/y are mapped.
struct FieldMapping {
  std::map<std::string, std::string> fields;
  char delimiter = ',';

  static FieldMapping parse(std::string_view text);  // key=value lines, '#' comments
  static FieldMapping load(const std::filesystem::path& path);
  /// historical_name, normalized_name, geometry, period, accuracy mapped to
  /// columns of the same name: the layout export_objects writes.
  static FieldMapping standard();

  std::optional<std::string> get(const std::string& key) const;
};

struct RejectedRow {
  std::size_t row = 0;  // 1-based data row (features count from 1 too)
  std::string raw;      // original text of the row or feature
  std::string reason;
};

struct LoadReport {
  std::size_t rows = 0;
  std::vector<ObjectId> inserted;
  std::vector<RejectedRow> rejects;
  std::string header;  // raw header line of a delimited file
};

struct LoadTarget {
  GazetteerId gazetteer;
  SourceId source;
  ProcessId process;
  ScaleClass scale_class = ScaleClass::precise;
};

/// Receives accepted objects in one batch and returns their ids. The
/// GazetteerRegistry& overloads insert straight into the registry; pass a
/// sink to route inserts elsewhere (an Engine, so they are journaled).
using ObjectSink = std::function<std::vector<ObjectId>(GazetteerId, std::vector<GeoHistoricalObject>)>;

/// Builds objects from `text`; rows that fail are collected, the rest are
/// inserted in one batch. Throws IngestError only for whole-file problems
/// (unparseable structure, unmapped mandatory field).
LoadReport load_objects(std::string_view text, FileFormat format, const FieldMapping& mapping, const LoadTarget& target,
                        GazetteerRegistry& registry, const AbbreviationTable& abbreviations = AbbreviationTable::defaults());
LoadReport load_objects(std::string_view text, FileFormat format, const FieldMapping& mapping, const LoadTarget& target,
                        const GazetteerRegistry& registry, const ObjectSink& sink,
                        const AbbreviationTable& abbreviations = AbbreviationTable::defaults());

LoadReport load_objects_file(const std::filesystem::path& path, FileFormat format, const FieldMapping& mapping,
                             const LoadTarget& target, GazetteerRegistry& registry,
                             const AbbreviationTable& abbreviations = AbbreviationTable::defaults());

/// Delimited text: the original header plus "reason", then each rejected row
/// verbatim with its reason appended.
std::string format_rejects(const LoadReport& report, char delimiter = ',');

/// Objects of one gazetteer in the FieldMapping::standard() layout.
std::string export_objects(const GazetteerRegistry& registry, GazetteerId gazetteer);

enum class Side { left, right };

Side parse_side(std::string_view text);

struct NumberedPoint {
  std::int64_t number = 0;
  Point point;
};

/// Numbers first, first + 2, ..., last spread along `segment`: the k-th of n
/// sits at curvilinear fraction (k + 0.5) / n, pushed road_width / 2 to the
/// given side (left is 90 degrees counterclockwise from travel direction).
/// Throws IngestError on a parity mismatch, first > last, a zero-length
/// segment or a negative width.
std::vector<NumberedPoint> interpolate_building_numbers(const Geometry::Path& segment, Side side, std::int64_t first,
                                                        std::int64_t last, double road_width);

/// Street-segment table -> numbered address points. Columns: name, geometry
/// (a polyline), side, first, last and optionally road_width (default
/// `default_road_width`). Rejected segments are reported like object rows.
LoadReport load_street_numbers(std::string_view text, const LoadTarget& target, GazetteerRegistry& registry,
                               double default_road_width = 10.0,
                               const AbbreviationTable& abbreviations = AbbreviationTable::defaults());
LoadReport load_street_numbers(std::string_view text, const LoadTarget& target, const GazetteerRegistry& registry,
                               const ObjectSink& sink, double default_road_width = 10.0,
                               const AbbreviationTable& abbreviations = AbbreviationTable::defaults());

/// Equirectangular projection around (lon0, lat0): x = R (lon - lon0) cos(lat0),
/// y = R (lat - lat0), angles in radians, R in meters.
struct Equirectangular {
  double lon0 = 0.0;
  double lat0 = 0.0;
  double radius = 6371000.0;

  /// Throws IngestError outside lon [-180, 180], lat [-90, 90].
  Point project(double lon, double lat) const;
};

struct ModernImport {
  Equirectangular projection;
  FuzzyPeriod period;
  double accuracy = 5.0;
};

/// Longitude/latitude points (x = lon, y = lat in `mapping`, or the feature
/// geometry) projected to planar meters and stored with the given period and
/// accuracy as object overrides.
LoadReport import_modern_addresses(std::string_view text, FileFormat format, const FieldMapping& mapping,
                                   const ModernImport& params, const LoadTarget& target, GazetteerRegistry& registry,
                                   const AbbreviationTable& abbreviations = AbbreviationTable::defaults());
LoadReport import_modern_addresses(std::string_view text, FileFormat format, const FieldMapping& mapping,
                                   const ModernImport& params, const LoadTarget& target,
                                   const GazetteerRegistry& registry, const ObjectSink& sink,
                                   const AbbreviationTable& abbreviations = AbbreviationTable::defaults());

std::string read_text_file(const std::filesystem::path& path);

}  // namespace histgeo
