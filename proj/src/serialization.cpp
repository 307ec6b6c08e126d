#include "histgeo/serialization.hpp"

#include <charconv>
#include <cmath>

#include "histgeo/geometry_json.hpp"

namespace histgeo {

using nlohmann::json;

nlohmann::json period_to_json(const FuzzyPeriod& p) { return json::array({p.a(), p.b(), p.c(), p.d()}); }

FuzzyPeriod period_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_fuzzy_date(j.get<std::string>());
  if (!j.is_array() || j.size() != 4) throw DateParseError("period must be [a, b, c, d] or a date string");
  for (const auto& v : j) {
    if (!v.is_number()) throw DateParseError("period bounds must be numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

nlohmann::json object_to_json(const GeoHistoricalObject& o) {
  json j = {{"id", o.id.value},
            {"historical_name", o.historical_name},
            {"normalized_name", o.normalized_name},
            {"source", o.source.value},
            {"process", o.process.value},
            {"geometry", geometry_to_json(o.geometry)},
            {"scale_class", to_string(o.scale_class)}};
  j["period"] = o.period ? period_to_json(*o.period) : json();
  j["accuracy"] = o.accuracy ? json(*o.accuracy) : json();
  return j;
}

GeoHistoricalObject object_from_json(const nlohmann::json& j, const std::string& default_crs) {
  GeoHistoricalObject o;
  o.id = ObjectId{j.value("id", std::uint64_t{0})};
  o.historical_name = j.at("historical_name").get<std::string>();
  o.normalized_name = j.at("normalized_name").get<std::string>();
  o.source = SourceId{j.at("source").get<std::uint64_t>()};
  o.process = ProcessId{j.at("process").get<std::uint64_t>()};
  o.geometry = geometry_from_json(j.at("geometry"), default_crs);
  o.scale_class = parse_scale_class(j.at("scale_class").get<std::string>());
  if (j.contains("period") && !j["period"].is_null()) o.period = period_from_json(j["period"]);
  if (j.contains("accuracy") && !j["accuracy"].is_null()) o.accuracy = j["accuracy"].get<double>();
  return o;
}

nlohmann::json source_to_json(const HistoricalSource& s) {
  return {{"id", s.id.value},
          {"name", s.name},
          {"description", s.description},
          {"default_period", period_to_json(s.default_period)},
          {"default_accuracy", s.default_accuracy}};
}

HistoricalSource source_from_json(const nlohmann::json& j) {
  return {SourceId{j.value("id", std::uint64_t{0})}, j.at("name").get<std::string>(), j.value("description", ""),
          period_from_json(j.at("default_period")), j.at("default_accuracy").get<double>()};
}

nlohmann::json process_to_json(const NumericalOriginProcess& p) {
  return {{"id", p.id.value},
          {"name", p.name},
          {"description", p.description},
          {"digitizing_precision", p.digitizing_precision}};
}

NumericalOriginProcess process_from_json(const nlohmann::json& j) {
  return {ProcessId{j.value("id", std::uint64_t{0})}, j.at("name").get<std::string>(), j.value("description", ""),
          j.at("digitizing_precision").get<double>()};
}

nlohmann::json gazetteer_to_json(const Gazetteer& g) {
  return {{"id", g.id.value}, {"name", g.name}, {"scale_class", to_string(g.scale_class)}, {"mixed", g.mixed}};
}

nlohmann::json metrics_to_json(const MetricVector& m) {
  return {{"w_d", m.w_d}, {"t_d", m.t_d}, {"b_d", m.b_d}, {"s_p", m.s_p}, {"s_d", m.s_d}, {"g_d", m.g_d}};
}

nlohmann::json result_to_json(const GeocodeResult& r) {
  json j = {{"id", r.object.id.value},
            {"rank", r.rank},
            {"name_historical", r.object.historical_name},
            {"name_normalized", r.object.normalized_name},
            {"geometry", geometry_to_json(r.object.geometry)},
            {"point", {r.point.x, r.point.y}},
            {"metrics", metrics_to_json(r.metrics)},
            {"flags",
             {{"number_compared", r.metrics.number_compared},
              {"t_d_available", r.metrics.t_d_available},
              {"g_d_available", r.metrics.g_d_available}}},
            {"gazetteer", r.gazetteer},
            {"source", r.source},
            {"period", period_to_json(r.period)},
            {"accuracy_m", r.accuracy},
            {"precision_class", to_string(r.precision_class)}};
  j["score"] = std::isfinite(r.score) ? json(r.score) : json();
  if (r.score_error) j["score_error"] = *r.score_error;
  return j;
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace histgeo
