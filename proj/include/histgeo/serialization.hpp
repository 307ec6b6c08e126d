#pragma once

#include <string>

#include <json.hpp>

#include "histgeo/gazetteer.hpp"
#include "histgeo/geocoder.hpp"

namespace histgeo {

/// Periods travel as [a, b, c, d].
nlohmann::json period_to_json(const FuzzyPeriod& p);
/// Accepts [a, b, c, d] or a date string in the parse_fuzzy_date grammar.
FuzzyPeriod period_from_json(const nlohmann::json& j);

nlohmann::json object_to_json(const GeoHistoricalObject& o);
GeoHistoricalObject object_from_json(const nlohmann::json& j, const std::string& default_crs = {});

nlohmann::json source_to_json(const HistoricalSource& s);
HistoricalSource source_from_json(const nlohmann::json& j);
nlohmann::json process_to_json(const NumericalOriginProcess& p);
NumericalOriginProcess process_from_json(const nlohmann::json& j);
nlohmann::json gazetteer_to_json(const Gazetteer& g);

nlohmann::json metrics_to_json(const MetricVector& m);

/// The documented REST result object (docs/rest-api.md).
nlohmann::json result_to_json(const GeocodeResult& r);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace histgeo
