#include "histgeo/geocoder.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace histgeo {

MetricQuery prepare_query(const GeocodeQuery& q, const AbbreviationTable& abbreviations) {
  if (q.raw_address.find_first_not_of(" \t\r\n") == std::string::npos) throw QueryError("address must not be empty");
  if (q.max_results < 1) throw QueryError("maxresults must be >= 1");
  if (!(q.max_string_distance >= 0.0 && q.max_string_distance <= 1.0)) {
    throw QueryError("maximum string distance must lie in [0, 1]");
  }
  MetricQuery mq;
  mq.address = normalize(q.raw_address, abbreviations);
  mq.period = q.period;
  mq.hint = q.hint;
  mq.scale.low = q.scale_low.value_or(ScaleRange{}.low);
  mq.scale.high = q.scale_high.value_or(ScaleRange{}.high);
  if (!(mq.scale.low >= 0.0 && mq.scale.low <= mq.scale.high)) throw QueryError("scale range needs 0 <= S_l <= S_h");
  mq.scale_zero_inside_range = q.scale_zero_inside_range;
  return mq;
}

bool ranks_before(double score_a, bool failed_a, const MetricVector& a, double score_b, bool failed_b,
                  const MetricVector& b) {
  if (failed_a != failed_b) return !failed_a;
  if (score_a != score_b) return score_a < score_b;
  if (a.w_d != b.w_d) return a.w_d < b.w_d;
  return a.t_d < b.t_d;
}

namespace {

struct Scored {
  const StoredObject* stored;
  MetricVector metrics;
  double score;
  std::optional<std::string> error;
};

}  // namespace

std::vector<GeocodeResult> geocode(const GeocodeQuery& q, const GazetteerRegistry& registry,
                                   const AbbreviationTable& abbreviations) {
  const MetricQuery mq = prepare_query(q, abbreviations);
  if (mq.address.normalized.empty()) return {};

  std::vector<Candidate> candidates;
  if (q.pooled_ranking) {
    candidates = registry.query_candidates(mq.address.normalized, q.max_string_distance,
                                           q.allow_rough_fallback ? ScaleFilter::both : ScaleFilter::precise);
  } else {
    candidates = registry.query_candidates(mq.address.normalized, q.max_string_distance, ScaleFilter::precise);
    if (candidates.empty() && q.allow_rough_fallback) {
      candidates = registry.query_candidates(mq.address.normalized, q.max_string_distance, ScaleFilter::rough);
    }
  }
  if (candidates.empty()) return {};

  const ScoringExpression& expression = q.scoring ? *q.scoring : ScoringExpression::default_expression();
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) {
    Scored s{c.stored.get(), compute_metrics(mq, *c.stored), 0.0, std::nullopt};
    try {
      s.score = expression.evaluate(s.metrics);
    } catch (const EvaluationError& e) {
      s.score = std::numeric_limits<double>::infinity();
      s.error = e.what();
    }
    scored.push_back(std::move(s));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    return ranks_before(x.score, x.error.has_value(), x.metrics, y.score, y.error.has_value(), y.metrics);
  });

  const std::size_t n = std::min(q.max_results, scored.size());
  const auto gazetteers = registry.gazetteers();
  std::vector<GeocodeResult> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Scored& s = scored[i];
    const StoredObject& stored = *s.stored;
    GeocodeResult r;
    r.object = stored.object;
    r.gazetteer = gazetteers[stored.gazetteer.value - 1].name;
    if (const auto src = registry.source(stored.object.source)) r.source = src->name;
    r.period = stored.effective_period;
    r.accuracy = stored.effective_accuracy;
    r.score = s.score;
    r.score_error = s.error;
    r.metrics = s.metrics;
    r.rank = i + 1;
    r.precision_class = stored.object.scale_class;
    r.point = representative_point(stored.object.geometry);
    out.push_back(std::move(r));
  }
  return out;
}

const char* to_string(BatchStatus s) {
  switch (s) {
    case BatchStatus::matched_precise: return "matched_precise";
    case BatchStatus::matched_rough: return "matched_rough";
    case BatchStatus::unmatched: return "unmatched";
    case BatchStatus::error: return "error";
  }
  return "error";
}

namespace {

BatchRowOutcome geocode_row(const BatchInput& row, const GeocodeQuery& defaults, const GazetteerRegistry& registry,
                            const AbbreviationTable& abbreviations) {
  BatchRowOutcome outcome;
  try {
    GeocodeQuery q = defaults;
    q.raw_address = row.address;
    if (row.date && row.date->find_first_not_of(" \t") != std::string::npos) q.period = parse_fuzzy_date(*row.date);
    outcome.results = geocode(q, registry, abbreviations);
    if (outcome.results.empty()) {
      outcome.status = BatchStatus::unmatched;
    } else {
      outcome.status = outcome.results.front().precision_class == ScaleClass::precise ? BatchStatus::matched_precise
                                                                                       : BatchStatus::matched_rough;
    }
  } catch (const std::exception& e) {
    outcome.status = BatchStatus::error;
    outcome.error = e.what();
    outcome.results.clear();
  }
  return outcome;
}

}  // namespace

BatchOutcome batch_geocode(const std::vector<BatchInput>& rows, const GeocodeQuery& defaults,
                           const GazetteerRegistry& registry, unsigned jobs, const AbbreviationTable& abbreviations) {
  BatchOutcome out;
  out.rows.resize(rows.size());
  const auto start = std::chrono::steady_clock::now();

  if (jobs <= 1 || rows.size() < 2) {
    for (std::size_t i = 0; i < rows.size(); ++i) out.rows[i] = geocode_row(rows[i], defaults, registry, abbreviations);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    const unsigned count = std::min<unsigned>(jobs, static_cast<unsigned>(rows.size()));
    for (unsigned w = 0; w < count; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
          out.rows[i] = geocode_row(rows[i], defaults, registry, abbreviations);
        }
      });
    }
  }

  const auto stop = std::chrono::steady_clock::now();
  BatchReport& report = out.report;
  report.rows = rows.size();
  for (const auto& r : out.rows) {
    switch (r.status) {
      case BatchStatus::matched_precise: ++report.matched_precise; break;
      case BatchStatus::matched_rough: ++report.matched_rough; break;
      case BatchStatus::unmatched: ++report.unmatched; break;
      case BatchStatus::error: ++report.errors; break;
    }
  }
  report.seconds = std::chrono::duration<double>(stop - start).count();
  report.seconds_per_1000 = rows.empty() ? 0.0 : report.seconds * 1000.0 / static_cast<double>(rows.size());
  return out;
}

std::string format_report_row(const std::string& dataset, const BatchReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s & %zu & %zu (%zu) & %.3g", dataset.c_str(), report.rows,
                report.matched_precise + report.matched_rough, report.matched_rough, report.seconds_per_1000);
  return buf;
}

namespace {

constexpr std::array<double, 5> kBinEdges = {0.0, 15.0, 55.0, 155.0, std::numeric_limits<double>::infinity()};

}  // namespace

ErrorHistogram evaluate_against_ground_truth(const std::vector<EvaluatedRow>& results,
                                             const std::vector<TruthRow>& truth) {
  std::map<std::string, Point> truth_by_id;
  for (const auto& t : truth) {
    if (!truth_by_id.emplace(t.id, t.point).second) throw AlignmentError("duplicate truth id '" + t.id + "'");
  }
  if (results.size() != truth.size()) {
    throw AlignmentError("results and truth have different row counts (" + std::to_string(results.size()) + " vs " +
                         std::to_string(truth.size()) + ")");
  }

  ErrorHistogram h;
  for (std::size_t b = 0; b < h.bins.size(); ++b) {
    h.bins[b].lower = kBinEdges[b];
    h.bins[b].upper = kBinEdges[b + 1];
  }
  std::map<std::string, bool> seen;
  for (const auto& r : results) {
    const auto it = truth_by_id.find(r.id);
    if (it == truth_by_id.end()) throw AlignmentError("result id '" + r.id + "' has no truth row");
    if (!seen.emplace(r.id, true).second) throw AlignmentError("duplicate result id '" + r.id + "'");
    if (!r.point) {
      ++h.unmatched;
      continue;
    }
    ++h.matched;
    const double d = std::hypot(r.point->x - it->second.x, r.point->y - it->second.y);
    for (auto& bin : h.bins) {
      if (d >= bin.lower && d < bin.upper) {
        ++bin.count;
        bin.mean_distance += d;
        bin.mean_w_d += r.w_d;
        bin.mean_t_d += r.t_d;
        break;
      }
    }
  }
  for (auto& bin : h.bins) {
    if (bin.count > 0) {
      const auto n = static_cast<double>(bin.count);
      bin.mean_distance /= n;
      bin.mean_w_d /= n;
      bin.mean_t_d /= n;
    }
    bin.percent = h.matched == 0 ? 0.0 : 100.0 * static_cast<double>(bin.count) / static_cast<double>(h.matched);
  }
  return h;
}

ErrorHistogram evaluate_against_ground_truth(const std::vector<std::optional<GeocodeResult>>& results,
                                             const std::vector<Point>& truth) {
  if (results.size() != truth.size()) throw AlignmentError("results and truth have different row counts");
  std::vector<EvaluatedRow> rows;
  std::vector<TruthRow> truth_rows;
  for (std::size_t i = 0; i < results.size(); ++i) {
    EvaluatedRow row{std::to_string(i), std::nullopt, 0.0, 0.0};
    if (results[i]) {
      row.point = results[i]->point;
      row.w_d = results[i]->metrics.w_d;
      row.t_d = results[i]->metrics.t_d;
    }
    rows.push_back(std::move(row));
    truth_rows.push_back({std::to_string(i), truth[i]});
  }
  return evaluate_against_ground_truth(rows, truth_rows);
}

std::string format_histogram(const ErrorHistogram& h) {
  std::ostringstream out;
  out << "dist. (m) & count & % & avg dist & avg(sem) & avg(tempo)\n";
  for (const auto& bin : h.bins) {
    char line[200];
    if (std::isinf(bin.upper)) {
      std::snprintf(line, sizeof line, "%g+ & %zu & %.1f %% & %.1f & %.3f & %.1f\n", bin.lower, bin.count, bin.percent,
                    bin.mean_distance, bin.mean_w_d, bin.mean_t_d);
    } else {
      std::snprintf(line, sizeof line, "%g - %g & %zu & %.1f %% & %.1f & %.3f & %.1f\n", bin.lower, bin.upper,
                    bin.count, bin.percent, bin.mean_distance, bin.mean_w_d, bin.mean_t_d);
    }
    out << line;
  }
  out << "matched " << h.matched << ", unmatched " << h.unmatched << "\n";
  return out.str();
}

}  // namespace histgeo
