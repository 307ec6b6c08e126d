#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "histgeo/fuzzy_time.hpp"
#include "histgeo/gazetteer.hpp"
#include "histgeo/geometry.hpp"
#include "histgeo/scoring.hpp"
#include "histgeo/text.hpp"

namespace histgeo {

struct GeocodeQuery {
  std::string raw_address;
  std::optional<FuzzyPeriod> period;
  std::optional<Geometry> hint;
  std::optional<double> scale_low;   // S_l, defaults to ScaleRange{}.low
  std::optional<double> scale_high;  // S_h, defaults to ScaleRange{}.high
  std::size_t max_results = 1;
  double max_string_distance = 0.3;
  bool allow_rough_fallback = true;
  std::optional<ScoringExpression> scoring;  // default expression when empty

  // Variants, off by default.
  bool pooled_ranking = false;  // rank precise and rough candidates together
  bool scale_zero_inside_range = false;
};

struct GeocodeResult {
  GeoHistoricalObject object;
  std::string gazetteer;
  std::string source;
  FuzzyPeriod period;      // effective
  double accuracy = 0.0;   // effective, m
  double score = 0.0;      // +inf when the expression failed for this candidate
  std::optional<std::string> score_error;
  MetricVector metrics;
  std::size_t rank = 0;  // 1-based
  ScaleClass precision_class = ScaleClass::precise;
  Point point;  // representative point
};

class QueryError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Throws QueryError for a blank address or invalid parameters.
MetricQuery prepare_query(const GeocodeQuery& q, const AbbreviationTable& abbreviations = AbbreviationTable::defaults());

/// Ranking order: scored candidates before failed ones, then ascending score,
/// then smaller w_d, then smaller t_d, then candidate order.
bool ranks_before(double score_a, bool failed_a, const MetricVector& a, double score_b, bool failed_b,
                  const MetricVector& b);

/// normalize -> precise candidates -> rough fallback when none -> metrics ->
/// score -> top max_results. An empty list means "no match".
std::vector<GeocodeResult> geocode(const GeocodeQuery& q, const GazetteerRegistry& registry,
                                   const AbbreviationTable& abbreviations = AbbreviationTable::defaults());

enum class BatchStatus { matched_precise, matched_rough, unmatched, error };
const char* to_string(BatchStatus s);

struct BatchInput {
  std::string address;
  std::optional<std::string> date;  // parsed with parse_fuzzy_date
};

struct BatchRowOutcome {
  BatchStatus status = BatchStatus::unmatched;
  std::vector<GeocodeResult> results;
  std::string error;  // set when status == error
};

struct BatchReport {
  std::size_t rows = 0;
  std::size_t matched_precise = 0;
  std::size_t matched_rough = 0;
  std::size_t unmatched = 0;
  std::size_t errors = 0;
  double seconds = 0.0;
  double seconds_per_1000 = 0.0;
};

struct BatchOutcome {
  std::vector<BatchRowOutcome> rows;  // input order
  BatchReport report;
};

/// Geocodes each row with `defaults` (raw_address and period replaced per
/// row). Row failures are recorded, never thrown. `jobs` > 1 spreads rows
/// over worker threads; output order is unchanged.
BatchOutcome batch_geocode(const std::vector<BatchInput>& rows, const GeocodeQuery& defaults,
                           const GazetteerRegistry& registry, unsigned jobs = 1,
                           const AbbreviationTable& abbreviations = AbbreviationTable::defaults());

/// One row of the summary table (e.g. "Synthetic & 1000 & 990 (12) & 4.2").
std::string format_report_row(const std::string& dataset, const BatchReport& report);

struct EvaluatedRow {
  std::string id;
  std::optional<Point> point;  // empty when unmatched
  double w_d = 0.0;
  double t_d = 0.0;
};

struct TruthRow {
  std::string id;
  Point point;
};

struct ErrorBin {
  double lower = 0.0;
  double upper = 0.0;  // +inf for the last bin
  std::size_t count = 0;
  double percent = 0.0;  // of matched rows
  double mean_distance = 0.0;
  double mean_w_d = 0.0;
  double mean_t_d = 0.0;
};

struct ErrorHistogram {
  std::array<ErrorBin, 4> bins;  // [0,15) [15,55) [55,155) [155,inf) meters
  std::size_t matched = 0;
  std::size_t unmatched = 0;
};

class AlignmentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Rows are paired by id; both sides must hold the same ids exactly once
/// (AlignmentError otherwise). Unmatched rows are counted, not binned.
ErrorHistogram evaluate_against_ground_truth(const std::vector<EvaluatedRow>& results,
                                             const std::vector<TruthRow>& truth);

/// Positional pairing of top results with truth points.
ErrorHistogram evaluate_against_ground_truth(const std::vector<std::optional<GeocodeResult>>& results,
                                             const std::vector<Point>& truth);

std::string format_histogram(const ErrorHistogram& h);

}  // namespace histgeo
