#include "histgeo/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "histgeo/csv.hpp"
#include "histgeo/geometry_json.hpp"

namespace histgeo {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& text, const char* what) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || end != t.data() + t.size() || !std::isfinite(v)) {
    throw IngestError(std::string("bad ") + what + " '" + text + "'");
  }
  return v;
}

std::int64_t parse_integer(const std::string& text, const char* what) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || end != t.data() + t.size()) {
    throw IngestError(std::string("bad ") + what + " '" + text + "'");
  }
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// One input record with its values keyed by column or property name.
struct RawRow {
  std::size_t index = 0;
  std::string raw;
  std::map<std::string, std::string> values;
  std::optional<json> geometry;

  std::optional<std::string> value(const FieldMapping& m, const std::string& key) const {
    const auto column = m.get(key);
    if (!column) return std::nullopt;
    const auto it = values.find(*column);
    if (it == values.end()) return std::nullopt;
    const std::string t = trim(it->second);
    if (t.empty()) return std::nullopt;
    return it->second;
  }
};

struct RawTable {
  std::string header;
  std::vector<RawRow> rows;
};

RawTable read_delimited(std::string_view text, char delimiter) {
  RawTable out;
  std::vector<CsvRecord> records;
  try {
    records = parse_csv(text, delimiter);
  } catch (const CsvError& e) {
    throw IngestError(e.what());
  }
  if (records.empty()) return out;
  const CsvRecord& header = records.front();
  out.header = header.raw;
  for (std::size_t r = 1; r < records.size(); ++r) {
    RawRow row;
    row.index = r;
    row.raw = records[r].raw;
    for (std::size_t c = 0; c < header.fields.size() && c < records[r].fields.size(); ++c) {
      row.values[header.fields[c]] = records[r].fields[c];
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

RawTable read_features(std::string_view text) {
  RawTable out;
  if (trim(text).empty()) return out;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IngestError(std::string("invalid JSON: ") + e.what());
  }
  const json* features = &doc;
  if (doc.is_object()) {
    if (!doc.contains("features") || !doc["features"].is_array()) throw IngestError("expected a FeatureCollection");
    features = &doc["features"];
  } else if (!doc.is_array()) {
    throw IngestError("expected a FeatureCollection or an array of features");
  }
  std::size_t index = 0;
  for (const auto& f : *features) {
    RawRow row;
    row.index = ++index;
    row.raw = f.dump();
    if (f.is_object()) {
      if (f.contains("properties") && f["properties"].is_object()) {
        for (const auto& [k, v] : f["properties"].items()) {
          if (v.is_null()) continue;
          row.values[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
      }
      if (f.contains("geometry") && !f["geometry"].is_null()) row.geometry = f["geometry"];
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

RawTable read_table(std::string_view text, FileFormat format, char delimiter) {
  return format == FileFormat::delimited ? read_delimited(text, delimiter) : read_features(text);
}

Geometry row_geometry(const RawRow& row, const FieldMapping& m, const std::string& crs) {
  if (m.get("x") && m.get("y")) {
    const auto x = row.value(m, "x");
    const auto y = row.value(m, "y");
    if (!x || !y) throw IngestError("missing coordinates");
    return Geometry::point({parse_number(*x, "x"), parse_number(*y, "y")}, crs);
  }
  if (m.get("geometry")) {
    const auto text = row.value(m, "geometry");
    if (!text) throw IngestError("missing geometry");
    json j;
    try {
      j = json::parse(*text);
    } catch (const json::parse_error&) {
      throw IngestError("geometry is not valid JSON");
    }
    return geometry_from_json(j, crs);
  }
  if (row.geometry) return geometry_from_json(*row.geometry, crs);
  throw IngestError("missing geometry");
}

void require_mapping(const FieldMapping& m, FileFormat format) {
  if (!m.get("historical_name")) throw IngestError("mapping lacks historical_name");
  const bool xy = m.get("x") && m.get("y");
  if (format == FileFormat::delimited && !xy && !m.get("geometry")) {
    throw IngestError("mapping needs either geometry or both x and y");
  }
  if (m.get("x").has_value() != m.get("y").has_value()) throw IngestError("mapping needs both x and y");
}

template <typename Build>
LoadReport load_rows(const RawTable& table, const LoadTarget& target, const GazetteerRegistry& registry,
                     const ObjectSink& sink, Build&& build) {
  LoadReport report;
  report.header = table.header;
  report.rows = table.rows.size();
  std::vector<GeoHistoricalObject> accepted;
  for (const auto& row : table.rows) {
    try {
      for (auto& obj : build(row)) {
        registry.validate(target.gazetteer, obj);
        accepted.push_back(std::move(obj));
      }
    } catch (const std::exception& e) {
      report.rejects.push_back({row.index, row.raw, e.what()});
    }
  }
  if (!accepted.empty()) report.inserted = sink(target.gazetteer, std::move(accepted));
  return report;
}

GeoHistoricalObject base_object(const LoadTarget& target) {
  GeoHistoricalObject o;
  o.source = target.source;
  o.process = target.process;
  o.scale_class = target.scale_class;
  return o;
}

ObjectSink registry_sink(GazetteerRegistry& registry) {
  return [&registry](GazetteerId g, std::vector<GeoHistoricalObject> objects) {
    return registry.insert_objects(g, std::move(objects));
  };
}

}  // namespace

FileFormat parse_file_format(std::string_view text) {
  if (text == "delimited" || text == "csv") return FileFormat::delimited;
  if (text == "json-features" || text == "geojson" || text == "json") return FileFormat::json_features;
  throw IngestError("unknown file format '" + std::string(text) + "'");
}

FieldMapping FieldMapping::parse(std::string_view text) {
  FieldMapping m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw IngestError("mapping line " + std::to_string(n) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "delimiter") {
      if (value == "\\t" || value == "tab") {
        m.delimiter = '\t';
      } else if (value.size() == 1) {
        m.delimiter = value[0];
      } else {
        throw IngestError("mapping line " + std::to_string(n) + ": delimiter must be one character");
      }
      continue;
    }
    static const char* known[] = {"historical_name", "normalized_name", "geometry", "x", "y", "period", "accuracy"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw IngestError("mapping line " + std::to_string(n) + ": unknown key '" + key + "'");
    }
    m.fields[key] = value;
  }
  return m;
}

FieldMapping FieldMapping::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

FieldMapping FieldMapping::standard() {
  FieldMapping m;
  for (const char* k : {"historical_name", "normalized_name", "geometry", "period", "accuracy"}) m.fields[k] = k;
  return m;
}

std::optional<std::string> FieldMapping::get(const std::string& key) const {
  const auto it = fields.find(key);
  if (it == fields.end() || it->second.empty()) return std::nullopt;
  return it->second;
}


LoadReport load_objects(std::string_view text, FileFormat format, const FieldMapping& mapping, const LoadTarget& target,
                        GazetteerRegistry& registry, const AbbreviationTable& abbreviations) {
  return load_objects(text, format, mapping, target, registry, registry_sink(registry), abbreviations);
}

LoadReport load_objects(std::string_view text, FileFormat format, const FieldMapping& mapping, const LoadTarget& target,
                        const GazetteerRegistry& registry, const ObjectSink& sink,
                        const AbbreviationTable& abbreviations) {
  require_mapping(mapping, format);
  const RawTable table = read_table(text, format, mapping.delimiter);
  return load_rows(table, target, registry, sink, [&](const RawRow& row) {
    GeoHistoricalObject o = base_object(target);
    const auto name = row.value(mapping, "historical_name");
    if (!name) throw IngestError("empty historical_name");
    o.historical_name = *name;
    const auto normalized = row.value(mapping, "normalized_name");
    o.normalized_name = normalized ? *normalized : normalize(*name, abbreviations).normalized;
    o.geometry = row_geometry(row, mapping, registry.crs());
    if (const auto p = row.value(mapping, "period")) o.period = parse_fuzzy_date(*p);
    if (const auto a = row.value(mapping, "accuracy")) o.accuracy = parse_number(*a, "accuracy");
    return std::vector<GeoHistoricalObject>{std::move(o)};
  });
}

LoadReport load_objects_file(const std::filesystem::path& path, FileFormat format, const FieldMapping& mapping,
                             const LoadTarget& target, GazetteerRegistry& registry,
                             const AbbreviationTable& abbreviations) {
  return load_objects(read_text_file(path), format, mapping, target, registry, abbreviations);
}

std::string format_rejects(const LoadReport& report, char delimiter) {
  std::string out;
  if (!report.header.empty()) out += report.header + delimiter + "reason\n";
  for (const auto& r : report.rejects) {
    out += (report.header.empty() ? csv_escape(r.raw, delimiter) : r.raw) + delimiter + csv_escape(r.reason, delimiter) +
           "\n";
  }
  return out;
}

std::string export_objects(const GazetteerRegistry& registry, GazetteerId gazetteer) {
  std::string out = "historical_name,normalized_name,geometry,period,accuracy\n";
  for (const auto& s : registry.objects()) {
    if (s->gazetteer != gazetteer) continue;
    const auto& o = s->object;
    out += csv_join({o.historical_name, o.normalized_name, geometry_to_json(o.geometry).dump(),
                     o.period ? format_fuzzy_date(*o.period) : std::string(),
                     o.accuracy ? format_number(*o.accuracy) : std::string()});
    out += '\n';
  }
  return out;
}

Side parse_side(std::string_view text) {
  if (text == "left" || text == "l" || text == "L") return Side::left;
  if (text == "right" || text == "r" || text == "R") return Side::right;
  throw IngestError("side must be left or right, got '" + std::string(text) + "'");
}

std::vector<NumberedPoint> interpolate_building_numbers(const Geometry::Path& segment, Side side, std::int64_t first,
                                                        std::int64_t last, double road_width) {
  if ((first - last) % 2 != 0) {
    throw IngestError("numbers " + std::to_string(first) + " and " + std::to_string(last) + " differ in parity");
  }
  if (first > last) {
    throw IngestError("first number " + std::to_string(first) + " exceeds last " + std::to_string(last) +
                      "; digitize the segment in the other direction");
  }
  if (!(road_width >= 0.0) || !std::isfinite(road_width)) throw IngestError("road width must be >= 0");
  std::vector<double> cumulative{0.0};
  for (std::size_t i = 1; i < segment.size(); ++i) {
    cumulative.push_back(cumulative.back() +
                         std::hypot(segment[i].x - segment[i - 1].x, segment[i].y - segment[i - 1].y));
  }
  const double length = cumulative.back();
  if (!(length > 0.0)) throw IngestError("segment has zero length");

  const std::int64_t n = (last - first) / 2 + 1;
  const double sign = side == Side::left ? 1.0 : -1.0;
  std::vector<NumberedPoint> out;
  out.reserve(static_cast<std::size_t>(n));
  std::size_t piece = 1;
  for (std::int64_t k = 0; k < n; ++k) {
    const double s = (static_cast<double>(k) + 0.5) / static_cast<double>(n) * length;
    while (piece + 1 < segment.size() && (cumulative[piece] < s || cumulative[piece] == cumulative[piece - 1])) ++piece;
    const Point a = segment[piece - 1], b = segment[piece];
    const double span = cumulative[piece] - cumulative[piece - 1];
    const double t = (s - cumulative[piece - 1]) / span;
    const double dx = (b.x - a.x) / span, dy = (b.y - a.y) / span;
    const double offset = sign * road_width / 2.0;
    out.push_back({first + 2 * k, {a.x + t * (b.x - a.x) - offset * dy, a.y + t * (b.y - a.y) + offset * dx}});
  }
  return out;
}

LoadReport load_street_numbers(std::string_view text, const LoadTarget& target, GazetteerRegistry& registry,
                               double default_road_width, const AbbreviationTable& abbreviations) {
  return load_street_numbers(text, target, registry, registry_sink(registry), default_road_width, abbreviations);
}

LoadReport load_street_numbers(std::string_view text, const LoadTarget& target, const GazetteerRegistry& registry,
                               const ObjectSink& sink, double default_road_width,
                               const AbbreviationTable& abbreviations) {
  const RawTable table = read_delimited(text, ',');
  FieldMapping m;
  m.fields["geometry"] = "geometry";
  const auto column = [](const RawRow& row, const char* key) -> std::optional<std::string> {
    const auto it = row.values.find(key);
    if (it == row.values.end() || trim(it->second).empty()) return std::nullopt;
    return it->second;
  };
  return load_rows(table, target, registry, sink, [&](const RawRow& row) {
    const auto name = column(row, "name");
    if (!name) throw IngestError("empty name");
    const Geometry g = row_geometry(row, m, registry.crs());
    if (g.kind() != GeometryKind::polyline) throw IngestError("segment geometry must be a polyline");
    const auto side = column(row, "side");
    const auto first = column(row, "first");
    const auto last = column(row, "last");
    if (!side || !first || !last) throw IngestError("side, first and last are required");
    const auto width = column(row, "road_width");
    const auto points = interpolate_building_numbers(g.components()[0][0], parse_side(trim(*side)),
                                                     parse_integer(*first, "first"), parse_integer(*last, "last"),
                                                     width ? parse_number(*width, "road_width") : default_road_width);
    std::vector<GeoHistoricalObject> objs;
    for (const auto& p : points) {
      GeoHistoricalObject o = base_object(target);
      o.historical_name = std::to_string(p.number) + " " + trim(*name);
      o.normalized_name = normalize(o.historical_name, abbreviations).normalized;
      o.geometry = Geometry::point(p.point, registry.crs());
      objs.push_back(std::move(o));
    }
    return objs;
  });
}

Point Equirectangular::project(double lon, double lat) const {
  if (!(lon >= -180.0 && lon <= 180.0 && lat >= -90.0 && lat <= 90.0)) {
    throw IngestError("coordinates (" + format_number(lon) + ", " + format_number(lat) + ") outside lon/lat range");
  }
  constexpr double rad = std::numbers::pi / 180.0;
  return {radius * (lon - lon0) * rad * std::cos(lat0 * rad), radius * (lat - lat0) * rad};
}

LoadReport import_modern_addresses(std::string_view text, FileFormat format, const FieldMapping& mapping,
                                   const ModernImport& params, const LoadTarget& target, GazetteerRegistry& registry,
                                   const AbbreviationTable& abbreviations) {
  return import_modern_addresses(text, format, mapping, params, target, registry, registry_sink(registry),
                                 abbreviations);
}

LoadReport import_modern_addresses(std::string_view text, FileFormat format, const FieldMapping& mapping,
                                   const ModernImport& params, const LoadTarget& target,
                                   const GazetteerRegistry& registry, const ObjectSink& sink,
                                   const AbbreviationTable& abbreviations) {
  if (!mapping.get("historical_name")) throw IngestError("mapping lacks historical_name");
  const bool xy = mapping.get("x") && mapping.get("y");
  if (format == FileFormat::delimited && !xy) throw IngestError("delimited modern addresses need x (lon) and y (lat)");
  if (!(params.projection.lat0 > -90.0 && params.projection.lat0 < 90.0)) {
    throw IngestError("projection latitude must lie strictly between -90 and 90");
  }
  const RawTable table = read_table(text, format, mapping.delimiter);
  return load_rows(table, target, registry, sink, [&](const RawRow& row) {
    GeoHistoricalObject o = base_object(target);
    const auto name = row.value(mapping, "historical_name");
    if (!name) throw IngestError("empty name");
    o.historical_name = *name;
    const auto normalized = row.value(mapping, "normalized_name");
    o.normalized_name = normalized ? *normalized : normalize(*name, abbreviations).normalized;
    Point lonlat;
    if (xy) {
      const auto x = row.value(mapping, "x");
      const auto y = row.value(mapping, "y");
      if (!x || !y) throw IngestError("missing coordinates");
      lonlat = {parse_number(*x, "longitude"), parse_number(*y, "latitude")};
    } else {
      if (!row.geometry) throw IngestError("missing geometry");
      const Geometry g = geometry_from_json(*row.geometry);
      if (g.kind() != GeometryKind::point) throw IngestError("modern addresses must be points");
      lonlat = g.components()[0][0][0];
    }
    o.geometry = Geometry::point(params.projection.project(lonlat.x, lonlat.y), registry.crs());
    o.period = params.period;
    o.accuracy = params.accuracy;
    return std::vector<GeoHistoricalObject>{std::move(o)};
  });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace histgeo
