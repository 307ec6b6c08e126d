#include "histgeo/config.hpp"

#include <cstdlib>
#include <set>

#include "histgeo/ingest.hpp"

namespace histgeo {

using nlohmann::json;

namespace {

const std::set<std::string> kKeys = {"listen",  "port",      "data_dir",   "static_dir", "crs",        "scoring",
                                     "maxdist", "maxresults", "scale_low", "scale_high", "batch_jobs", "abbreviations"};

void check(const Config& c) {
  if (c.port < 0 || c.port > 65535) throw ConfigError("port out of range");
  if (!(c.maxdist >= 0.0 && c.maxdist <= 1.0)) throw ConfigError("maxdist must be in [0, 1]");
  if (c.maxresults == 0) throw ConfigError("maxresults must be positive");
  if (c.batch_jobs == 0) throw ConfigError("batch_jobs must be positive");
  if (c.scale_low && c.scale_high && *c.scale_low > *c.scale_high) throw ConfigError("scale_low > scale_high");
}

}  // namespace

Config Config::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!kKeys.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  Config c;
  try {
    c.listen = j.value("listen", c.listen);
    c.port = j.value("port", c.port);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.static_dir = j.value("static_dir", c.static_dir);
    c.crs = j.value("crs", c.crs);
    c.scoring = j.value("scoring", c.scoring);
    c.maxdist = j.value("maxdist", c.maxdist);
    c.maxresults = j.value("maxresults", c.maxresults);
    if (j.contains("scale_low") && !j["scale_low"].is_null()) c.scale_low = j["scale_low"].get<double>();
    if (j.contains("scale_high") && !j["scale_high"].is_null()) c.scale_high = j["scale_high"].get<double>();
    c.batch_jobs = j.value("batch_jobs", c.batch_jobs);
    c.abbreviations = j.value("abbreviations", c.abbreviations);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  check(c);
  return c;
}

nlohmann::json Config::to_json() const {
  json j = {{"listen", listen},         {"port", port},       {"data_dir", data_dir},
            {"static_dir", static_dir}, {"crs", crs},         {"scoring", scoring},
            {"maxdist", maxdist},       {"maxresults", maxresults}, {"batch_jobs", batch_jobs},
            {"abbreviations", abbreviations}};
  j["scale_low"] = scale_low ? json(*scale_low) : json();
  j["scale_high"] = scale_high ? json(*scale_high) : json();
  return j;
}

void Config::apply_env(const EnvLookup& lookup) {
  auto text = [&](const char* name, std::string& field) {
    if (const char* v = lookup(name)) field = v;
  };
  auto number = [&](const char* name, auto& field) {
    const char* v = lookup(name);
    if (!v) return;
    try {
      std::size_t used = 0;
      const std::string s(v);
      const double d = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      using T = std::remove_reference_t<decltype(field)>;
      if constexpr (std::is_same_v<T, std::optional<double>>) {
        field = d;
      } else {
        if constexpr (std::is_integral_v<T>) {
          if (d != static_cast<double>(static_cast<long long>(d)) || d < 0) throw std::invalid_argument(s);
        }
        field = static_cast<T>(d);
      }
    } catch (const std::logic_error&) {
      throw ConfigError(std::string(name) + ": not a valid number: '" + v + "'");
    }
  };
  text("HISTGEO_LISTEN", listen);
  number("HISTGEO_PORT", port);
  text("HISTGEO_DATA_DIR", data_dir);
  text("HISTGEO_STATIC_DIR", static_dir);
  text("HISTGEO_CRS", crs);
  text("HISTGEO_SCORING", scoring);
  number("HISTGEO_MAXDIST", maxdist);
  number("HISTGEO_MAXRESULTS", maxresults);
  number("HISTGEO_SCALE_LOW", scale_low);
  number("HISTGEO_SCALE_HIGH", scale_high);
  number("HISTGEO_BATCH_JOBS", batch_jobs);
  text("HISTGEO_ABBREVIATIONS", abbreviations);
  check(*this);
}

Config Config::load(const std::optional<std::filesystem::path>& path) {
  Config c;
  if (path) {
    try {
      c = from_json(json::parse(read_text_file(*path)));
    } catch (const json::exception& e) {
      throw ConfigError(path->string() + ": " + e.what());
    }
  }
  c.apply_env([](const char* name) { return std::getenv(name); });
  return c;
}

GeocodeQuery Config::query_defaults() const {
  GeocodeQuery q;
  q.max_string_distance = maxdist;
  q.max_results = maxresults;
  q.scale_low = scale_low;
  q.scale_high = scale_high;
  if (!scoring.empty()) {
    try {
      q.scoring = ScoringExpression::parse(scoring);
    } catch (const ExpressionError& e) {
      throw ConfigError("scoring: " + std::string(e.what()));
    }
  }
  return q;
}

}  // namespace histgeo
