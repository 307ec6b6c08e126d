#include "histgeo/fuzzy_time.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <vector>

namespace histgeo {

FuzzyPeriod::FuzzyPeriod(double a, double b, double c, double d) : a_(a), b_(b), c_(c), d_(d) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d)) {
    throw std::invalid_argument("fuzzy period breakpoints must be finite");
  }
  if (!(a <= b && b <= c && c <= d)) {
    throw std::invalid_argument("fuzzy period breakpoints must satisfy a <= b <= c <= d");
  }
}

double membership(const FuzzyPeriod& p, double t) {
  if (t < p.a() || t > p.d()) return 0.0;
  if (t >= p.b() && t <= p.c()) return 1.0;
  if (t < p.b()) return (t - p.a()) / (p.b() - p.a());
  return (p.d() - t) / (p.d() - p.c());
}

double area(const FuzzyPeriod& p) { return ((p.d() - p.a()) + (p.c() - p.b())) / 2.0; }

namespace {

// Linear piece y = slope * x + intercept of the membership function on an
// open interval that contains no breakpoint of `p`.
struct LinearPiece {
  double slope = 0.0;
  double intercept = 0.0;
  double at(double x) const { return slope * x + intercept; }
};

LinearPiece piece_around(const FuzzyPeriod& p, double x) {
  if (x <= p.a() || x >= p.d()) return {};
  if (x < p.b()) {
    const double s = 1.0 / (p.b() - p.a());
    return {s, -p.a() * s};
  }
  if (x <= p.c()) return {0.0, 1.0};
  const double s = -1.0 / (p.d() - p.c());
  return {s, p.d() / (p.d() - p.c())};
}

double integrate_min(const LinearPiece& f, const LinearPiece& g, double x0, double x1) {
  const double f0 = f.at(x0), f1 = f.at(x1);
  const double g0 = g.at(x0), g1 = g.at(x1);
  const double d0 = f0 - g0, d1 = f1 - g1;
  if ((d0 <= 0.0 && d1 <= 0.0) || (d0 >= 0.0 && d1 >= 0.0)) {
    const double lo0 = std::min(f0, g0), lo1 = std::min(f1, g1);
    // Sign agreement at both ends means one line stays below on the interval.
    return 0.5 * (lo0 + lo1) * (x1 - x0);
  }
  const double xc = x0 + (x1 - x0) * d0 / (d0 - d1);
  const double yc = f.at(xc);
  return 0.5 * (std::min(f0, g0) + yc) * (xc - x0) + 0.5 * (yc + std::min(f1, g1)) * (x1 - xc);
}

struct Vec {
  double x;
  double y;
};

double point_segment_distance(Vec p, Vec s0, Vec s1) {
  const double dx = s1.x - s0.x, dy = s1.y - s0.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - s0.x) * dx + (p.y - s0.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (s0.x + t * dx), p.y - (s0.y + t * dy));
}

// Segments of the trapezoid outline; degenerate edges collapse to points and
// still work with point_segment_distance.
std::array<std::array<Vec, 2>, 4> outline(const FuzzyPeriod& p) {
  const Vec va{p.a(), 0.0}, vb{p.b(), 1.0}, vc{p.c(), 1.0}, vd{p.d(), 0.0};
  return {{{va, vb}, {vb, vc}, {vc, vd}, {vd, va}}};
}

}  // namespace

double intersection_area(const FuzzyPeriod& p1, const FuzzyPeriod& p2) {
  const double lo = std::max(p1.a(), p2.a());
  const double hi = std::min(p1.d(), p2.d());
  if (!(lo < hi)) return 0.0;

  std::vector<double> xs = {p1.a(), p1.b(), p1.c(), p1.d(), p2.a(), p2.b(), p2.c(), p2.d()};
  std::sort(xs.begin(), xs.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double x0 = std::max(xs[i], lo);
    const double x1 = std::min(xs[i + 1], hi);
    if (!(x0 < x1)) continue;
    const double mid = 0.5 * (x0 + x1);
    total += integrate_min(piece_around(p1, mid), piece_around(p2, mid), x0, x1);
  }
  return total;
}

double gap(const FuzzyPeriod& p1, const FuzzyPeriod& p2) {
  // Both outlines contain their base [a, d] x {0}.
  if (std::max(p1.a(), p2.a()) <= std::min(p1.d(), p2.d())) return 0.0;

  double best = std::numeric_limits<double>::infinity();
  for (const auto& e1 : outline(p1)) {
    for (const auto& e2 : outline(p2)) {
      // Disjoint supports: the segments cannot cross, so endpoint distances suffice.
      best = std::min({best, point_segment_distance(e1[0], e2[0], e2[1]),
                       point_segment_distance(e1[1], e2[0], e2[1]),
                       point_segment_distance(e2[0], e1[0], e1[1]),
                       point_segment_distance(e2[1], e1[0], e1[1])});
    }
  }
  return best;
}

double temporal_distance(const FuzzyPeriod& query, const FuzzyPeriod& candidate) {
  const double value = gap(query, candidate) + area(query) - intersection_area(query, candidate);
  // Rounding can leave a tiny negative residue for identical periods.
  return std::max(0.0, value);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
}

double parse_real(std::string_view token) {
  token = trim(token);
  double value = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (!token.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (token.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw DateParseError("invalid date token '" + std::string(token) + "'");
  }
  return value;
}

FuzzyPeriod ordered(double a, double b, double c, double d) {
  if (!(a <= b && b <= c && c <= d)) {
    throw DateParseError("date breakpoints out of order: expected a <= b <= c <= d");
  }
  return {a, b, c, d};
}

}  // namespace

FuzzyPeriod parse_fuzzy_date(std::string_view text) {
  const std::string_view s = trim(text);
  if (s.empty()) throw DateParseError("empty date");

  if (s.find(';') != std::string_view::npos) {
    std::array<double, 4> v{};
    std::size_t start = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto sep = s.find(';', start);
      if ((i < 3) != (sep != std::string_view::npos)) {
        throw DateParseError("fuzzy date '" + std::string(s) + "' must have exactly four ';'-separated values");
      }
      v[i] = parse_real(s.substr(start, sep == std::string_view::npos ? std::string_view::npos : sep - start));
      start = sep + 1;
    }
    return ordered(v[0], v[1], v[2], v[3]);
  }

  if (all_digits(s)) {
    const double year = parse_real(s);
    return {year, year, year + 1.0, year + 1.0};
  }

  const auto dash = s.find('-');
  if (dash != std::string_view::npos && dash > 0) {
    const std::string_view from = trim(s.substr(0, dash));
    const std::string_view to = trim(s.substr(dash + 1));
    if (!all_digits(from)) throw DateParseError("invalid date token '" + std::string(from) + "'");
    if (!all_digits(to)) throw DateParseError("invalid date token '" + std::string(to) + "'");
    const double y1 = parse_real(from), y2 = parse_real(to);
    return ordered(y1, y1, y2, y2);
  }

  throw DateParseError("invalid date token '" + std::string(s) + "'");
}

namespace {
std::string shortest(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}
}  // namespace

std::string format_fuzzy_date(const FuzzyPeriod& p) {
  return shortest(p.a()) + ";" + shortest(p.b()) + ";" + shortest(p.c()) + ";" + shortest(p.d());
}

}  // namespace histgeo
