#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "histgeo/fuzzy_time.hpp"
#include "histgeo/gazetteer.hpp"
#include "histgeo/geometry.hpp"
#include "histgeo/text.hpp"

namespace histgeo {

/// The six per-candidate distances. Every component is >= 0 and lower is
/// better. Metrics that could not be computed are 0 with their flag cleared.
struct MetricVector {
  double w_d = 0.0;  // trigram string distance, [0, 1]
  double t_d = 0.0;  // temporal distance, year * degree
  double b_d = 0.0;  // building number distance
  double s_p = 0.0;  // positional accuracy, m
  double s_d = 0.0;  // scale (level of detail) distance, m
  double g_d = 0.0;  // distance to the hint geometry, m
  bool number_compared = false;
  bool t_d_available = false;
  bool g_d_available = false;

  friend bool operator==(const MetricVector&, const MetricVector&) = default;
};

enum class Metric { w_d, t_d, b_d, s_p, s_d, g_d };

double metric_value(const MetricVector& m, Metric which);

/// Parse failure with the 0-based character offset it was detected at.
class ExpressionError : public std::invalid_argument {
public:
  enum class Kind { syntax, unknown_identifier, arity };
  ExpressionError(Kind kind, std::size_t position, const std::string& message);
  Kind kind() const { return kind_; }
  std::size_t position() const { return position_; }

private:
  Kind kind_;
  std::size_t position_;
};

/// Domain error while scoring one candidate (division by zero, ln of a
/// non-positive value, non-finite result).
class EvaluationError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Closed arithmetic language over metric names.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | primary
///   primary := number | metric | function '(' expr (',' expr)* ')' | '(' expr ')'
///
/// Metrics: w_d t_d b_d n_d s_p s_d g_d (n_d is b_d). Functions: least/2,
/// greatest/2, pow/2, abs/1, sqrt/1, ln/1, exp/1.
class ScoringExpression {
public:
  /// Throws ExpressionError.
  static ScoringExpression parse(std::string_view text);

  /// 100*w_d + 0.1*t_d + 10*n_d + 0.1*s_p + 0.01*s_d + 0.001*g_d
  static const ScoringExpression& default_expression();

  /// Throws EvaluationError.
  double evaluate(const MetricVector& m) const;

  /// Fully parenthesized form; parse(to_string()) evaluates identically.
  std::string to_string() const;
  const std::string& source() const { return source_; }

  struct Node;

private:
  ScoringExpression() = default;

  double eval(int node, const MetricVector& m) const;
  void print(int node, std::string& out) const;

  std::string source_;
  std::vector<Node> nodes_;
  int root_ = -1;

  friend class ExpressionParser;
};

struct ScoringExpression::Node {
  enum class Op { number, metric, negate, add, subtract, multiply, divide, call };
  enum class Fn { least, greatest, pow, abs, sqrt, ln, exp };
  Op op = Op::number;
  double number = 0.0;
  Metric metric = Metric::w_d;
  std::string spelling;  // metric or function name as written
  Fn fn = Fn::abs;
  int lhs = -1;
  int rhs = -1;
};

inline constexpr const char* kDefaultScoring = "100*w_d+0.1*t_d+10*n_d+0.1*s_p + 0.01*s_d+0.001*g_d";

inline ScoringExpression parse_expression(std::string_view text) { return ScoringExpression::parse(text); }
inline double evaluate(const ScoringExpression& e, const MetricVector& m) { return e.evaluate(m); }

/// Target scale range (S_l, S_h) in meters.
struct ScaleRange {
  double low = 0.0;
  double high = 200.0;
};

/// min(|f - S_l|, |f - S_h|) with f = sqrt(area(buffer(g, precision))).
/// With `zero_inside_range`, f within [S_l, S_h] scores 0 instead.
/// Throws std::invalid_argument for S_l > S_h or negative precision.
double scale_distance(const Geometry& g, double precision, ScaleRange range, bool zero_inside_range = false);
double scale_distance_from_footprint(double footprint, ScaleRange range, bool zero_inside_range = false);

/// Query-side inputs of the metrics, already normalized.
struct MetricQuery {
  NormalizedAddress address;
  std::optional<FuzzyPeriod> period;
  std::optional<Geometry> hint;
  ScaleRange scale;
  bool scale_zero_inside_range = false;
};

MetricVector compute_metrics(const MetricQuery& query, const StoredObject& candidate);

}  // namespace histgeo
