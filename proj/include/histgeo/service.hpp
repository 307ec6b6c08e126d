#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "histgeo/config.hpp"
#include "histgeo/engine.hpp"
#include "histgeo/geocoder.hpp"

namespace histgeo {

/// A request the service refuses; maps to an HTTP status and JSON body.
class RequestError : public std::runtime_error {
public:
  RequestError(int status, const std::string& message, std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(message), status_(status), position_(position) {}
  int status() const { return status_; }
  std::optional<std::size_t> position() const { return position_; }
  nlohmann::json body() const;

private:
  int status_;
  std::optional<std::size_t> position_;
};

using Params = std::map<std::string, std::string>;

struct GeocodeRequest {
  GeocodeQuery query;
  bool persist = false;
};

/// address, date, precision, maxresults, maxdist, scoring, persist.
/// precision=true restricts results to precise objects (no rough fallback).
GeocodeRequest parse_geocode_params(const Params& params, const GeocodeQuery& defaults);

/// Same parameters minus address/date/persist; used by batch requests.
GeocodeQuery apply_query_params(const Params& params, GeocodeQuery q);

struct BatchCsvOptions {
  std::string address_column = "address";
  std::string date_column = "date";  // optional in the file
  char delimiter = ',';
  unsigned jobs = 1;
  bool persist = true;
};

struct BatchCsvResult {
  std::string csv;
  std::optional<std::string> ruid;
  BatchReport report;
};

/// Columns appended to every batch output row.
const std::vector<std::string>& batch_output_columns();

/// Geocodes every row of `text`. Each output line is the input record's
/// original text followed by the appended columns. Throws RequestError (400)
/// when the file or its header is unusable.
BatchCsvResult run_batch_csv(std::string_view text, const BatchCsvOptions& options, const GeocodeQuery& defaults,
                             Engine& engine, const AbbreviationTable& abbreviations = AbbreviationTable::defaults());

/// JSON listing of a persisted result set.
nlohmann::json results_to_json(const std::string& ruid, const std::vector<ResultRecord>& records);

/// HTTP front end over an Engine.
class Service {
public:
  Service(Engine& engine, Config config, AbbreviationTable abbreviations = AbbreviationTable::defaults());
  ~Service();

  /// Binds config.listen:config.port (port 0 picks a free port) and returns
  /// the bound port; throws std::runtime_error when binding fails.
  int bind();
  /// Serves until stop(); call after bind().
  void run();
  void stop();
  /// Flushes the journal after the listener has stopped.
  void shutdown();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace histgeo
