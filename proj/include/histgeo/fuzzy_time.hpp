#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace histgeo {

/// Uncertain valid time as a trapezoidal fuzzy set over fractional years.
///
/// Membership is 0 outside [a, d], 1 on [b, c] and linear on the two flanks.
/// Degenerate shapes are allowed: a == b == c == d is a crisp instant and
/// a == b, c == d a crisp interval.
class FuzzyPeriod {
public:
  FuzzyPeriod() = default;

  /// Throws std::invalid_argument unless a <= b <= c <= d and all are finite.
  FuzzyPeriod(double a, double b, double c, double d);

  static FuzzyPeriod instant(double t) { return {t, t, t, t}; }
  static FuzzyPeriod interval(double from, double to) { return {from, from, to, to}; }

  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  double d() const { return d_; }

  FuzzyPeriod shifted(double delta) const {
    return {a_ + delta, b_ + delta, c_ + delta, d_ + delta};
  }

  friend bool operator==(const FuzzyPeriod&, const FuzzyPeriod&) = default;

private:
  double a_ = 0.0;
  double b_ = 0.0;
  double c_ = 0.0;
  double d_ = 0.0;
};

class DateParseError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Degree of membership of `t` in `p`, in [0, 1].
double membership(const FuzzyPeriod& p, double t);

/// Area under the membership curve: ((d - a) + (c - b)) / 2.
double area(const FuzzyPeriod& p);

/// Area under min(membership(p1), membership(p2)), integrated exactly.
double intersection_area(const FuzzyPeriod& p1, const FuzzyPeriod& p2);

/// Shortest distance between the two trapezoids drawn as polygons in the
/// (time, membership) plane. Years on x, degree on y, no rescaling.
double gap(const FuzzyPeriod& p1, const FuzzyPeriod& p2);

/// gap(query, candidate) + area(query) - intersection_area(query, candidate).
///
/// Asymmetric: the penalty is the part of the query period not explained by
/// the candidate, so argument order matters.
double temporal_distance(const FuzzyPeriod& query, const FuzzyPeriod& candidate);

/// Accepts "YYYY" (one-year crisp interval), "YYYY-YYYY" (crisp interval) and
/// "a;b;c;d" (four reals). Throws DateParseError.
FuzzyPeriod parse_fuzzy_date(std::string_view text);

/// Inverse of the "a;b;c;d" grammar, with round-trip exact number formatting.
std::string format_fuzzy_date(const FuzzyPeriod& p);

}  // namespace histgeo
