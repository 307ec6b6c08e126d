#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "histgeo/geocoder.hpp"

namespace histgeo {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Service settings. Read from a JSON file, then HISTGEO_<KEY> environment
/// variables (upper-cased key names) override individual fields.
struct Config {
  std::string listen = "127.0.0.1";
  int port = 8080;
  std::string data_dir;    // empty: in-memory, nothing persisted
  std::string static_dir;  // empty: no static files
  std::string crs = "local";
  std::string scoring;  // empty: default expression
  double maxdist = 0.3;
  std::size_t maxresults = 1;
  std::optional<double> scale_low;
  std::optional<double> scale_high;
  unsigned batch_jobs = 1;
  std::string abbreviations;  // abbreviation file, empty: built-in table

  static Config from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  using EnvLookup = std::function<const char*(const char*)>;
  /// Throws ConfigError naming the variable when a value does not parse.
  void apply_env(const EnvLookup& lookup);

  /// File (optional) then process environment.
  static Config load(const std::optional<std::filesystem::path>& path);

  /// GeocodeQuery defaults implied by the settings; throws ConfigError for a
  /// bad scoring expression.
  GeocodeQuery query_defaults() const;
};

}  // namespace histgeo
