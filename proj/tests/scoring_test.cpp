#include "histgeo/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

namespace histgeo {
namespace {

MetricVector metrics(double w, double t, double b, double sp, double sd, double g) {
  MetricVector m;
  m.w_d = w;
  m.t_d = t;
  m.b_d = b;
  m.s_p = sp;
  m.s_d = sd;
  m.g_d = g;
  return m;
}

MetricVector random_metrics(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> w(0, 1), t(0, 200), b(0, 100), s(0, 60), g(0, 5000);
  return metrics(w(rng), t(rng), b(rng), s(rng), s(rng), g(rng));
}

double eval(const std::string& text, const MetricVector& m) { return ScoringExpression::parse(text).evaluate(m); }

ExpressionError::Kind parse_error_kind(const std::string& text) {
  try {
    ScoringExpression::parse(text);
  } catch (const ExpressionError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << text;
  return ExpressionError::Kind::syntax;
}

TEST(Expression, ParsesDefault) {
  const auto e = ScoringExpression::parse(kDefaultScoring);
  EXPECT_EQ(e.source(), kDefaultScoring);
  EXPECT_DOUBLE_EQ(e.evaluate(MetricVector{}), 0.0);
}

TEST(Expression, Errors) {
  EXPECT_EQ(parse_error_kind("w_d + unknown_var"), ExpressionError::Kind::unknown_identifier);
  EXPECT_EQ(parse_error_kind("least(s_d)"), ExpressionError::Kind::arity);
  EXPECT_EQ(parse_error_kind("abs(s_d, 1)"), ExpressionError::Kind::arity);
  EXPECT_EQ(parse_error_kind("w_d +"), ExpressionError::Kind::syntax);
  EXPECT_EQ(parse_error_kind("(w_d"), ExpressionError::Kind::syntax);
  EXPECT_EQ(parse_error_kind(""), ExpressionError::Kind::syntax);
  EXPECT_EQ(parse_error_kind("w_d t_d"), ExpressionError::Kind::syntax);
  EXPECT_EQ(parse_error_kind("frobnicate(w_d)"), ExpressionError::Kind::unknown_identifier);
  try {
    ScoringExpression::parse("w_d + * 2");
    FAIL();
  } catch (const ExpressionError& e) {
    EXPECT_EQ(e.position(), 6u);
  }
  EXPECT_NO_THROW(ScoringExpression::parse("least(s_d, 5)"));
}

TEST(Expression, EvaluatesEquationExample) {
  const double by_hand = 100 * 0.1 + 0.1 * 20 + 10 * 2 + 0.1 * 5 + 0.01 * 10 + 0.001 * 100;
  EXPECT_NEAR(by_hand, 32.7, 1e-12);
  EXPECT_NEAR(eval(kDefaultScoring, metrics(0.1, 20, 2, 5, 10, 100)), by_hand, 1e-12);
}

TEST(Expression, FunctionsAndAliases) {
  const auto m = metrics(0.25, 9, 4, 2, 3, 100);
  EXPECT_DOUBLE_EQ(eval("n_d", m), 4.0);
  EXPECT_DOUBLE_EQ(eval("b_d", m), 4.0);
  EXPECT_DOUBLE_EQ(eval("least(s_d, 5)", m), 3.0);
  EXPECT_DOUBLE_EQ(eval("greatest(s_d, 5)", m), 5.0);
  EXPECT_DOUBLE_EQ(eval("pow(t_d, 0.5) + sqrt(t_d)", m), 6.0);
  EXPECT_DOUBLE_EQ(eval("abs(s_p - s_d)", m), 1.0);
  EXPECT_DOUBLE_EQ(eval("ln(exp(w_d))", m), 0.25);
  EXPECT_DOUBLE_EQ(eval("-w_d * 4 - -1", m), 0.0);
  EXPECT_DOUBLE_EQ(eval("2 * (3 + 4) / 7", m), 2.0);
  EXPECT_DOUBLE_EQ(eval("1e2 * w_d", m), 25.0);
}

TEST(Expression, DomainErrors) {
  const auto m = metrics(0.25, 0, 0, 0, 0, 0);
  EXPECT_THROW(eval("w_d/0", m), EvaluationError);
  EXPECT_THROW(eval("ln(t_d)", m), EvaluationError);
  EXPECT_THROW(eval("sqrt(0 - 1)", m), EvaluationError);
  EXPECT_THROW(eval("exp(1000)", m), EvaluationError);
}

TEST(Expression, PrintRoundTrip) {
  const std::vector<std::string> sources = {kDefaultScoring,
                                            "t_d",
                                            "-w_d - -t_d",
                                            "w_d - (t_d - b_d)",
                                            "w_d / (s_p / 3)",
                                            "least(w_d, greatest(t_d, 0.1)) * pow(s_d + 1, 1.5)",
                                            "0.1 + 0.2 * sqrt(g_d) - abs(s_p - 7) / 3",
                                            "ln(1 + g_d) + exp(-w_d)"};
  std::mt19937_64 rng(5);
  for (const auto& src : sources) {
    const auto e = ScoringExpression::parse(src);
    const auto again = ScoringExpression::parse(e.to_string());
    EXPECT_EQ(again.to_string(), e.to_string());
    for (int i = 0; i < 50; ++i) {
      const auto m = random_metrics(rng);
      EXPECT_EQ(again.evaluate(m), e.evaluate(m)) << src;
    }
  }
}

std::vector<std::size_t> argsort(const ScoringExpression& e, const std::vector<MetricVector>& ms) {
  std::vector<std::size_t> idx(ms.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> s;
  for (const auto& m : ms) s.push_back(e.evaluate(m));
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  return idx;
}

TEST(Expression, PositiveScalingKeepsOrder) {
  std::mt19937_64 rng(77);
  const auto base = ScoringExpression::parse(kDefaultScoring);
  for (const double k : {0.5, 2.0, 3.0, 1000.0}) {
    const auto scaled = ScoringExpression::parse(std::to_string(k) + " * (" + std::string(kDefaultScoring) + ")");
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<MetricVector> ms;
      for (int i = 0; i < 30; ++i) ms.push_back(random_metrics(rng));
      EXPECT_EQ(argsort(base, ms), argsort(scaled, ms));
    }
  }
}

TEST(Expression, DefaultIsStrictlyMonotone) {
  std::mt19937_64 rng(8);
  const auto& e = ScoringExpression::default_expression();
  const Metric all[] = {Metric::w_d, Metric::t_d, Metric::b_d, Metric::s_p, Metric::s_d, Metric::g_d};
  for (int i = 0; i < 200; ++i) {
    const auto m = random_metrics(rng);
    for (const auto which : all) {
      MetricVector bumped = m;
      double* field = nullptr;
      switch (which) {
        case Metric::w_d: field = &bumped.w_d; break;
        case Metric::t_d: field = &bumped.t_d; break;
        case Metric::b_d: field = &bumped.b_d; break;
        case Metric::s_p: field = &bumped.s_p; break;
        case Metric::s_d: field = &bumped.s_d; break;
        case Metric::g_d: field = &bumped.g_d; break;
      }
      *field += 1.0;
      EXPECT_GT(e.evaluate(bumped), e.evaluate(m));
    }
  }
}

// sqrt of the area of a regular 64-gon inscribed in a circle of radius r.
double inscribed_footprint(double r) {
  return std::sqrt(0.5 * kCircleSegments * r * r * std::sin(2 * std::numbers::pi / kCircleSegments));
}

TEST(ScaleDistance, Examples) {
  const Geometry p = Geometry::point({0, 0});
  const double d = scale_distance(p, 10, {0, 50});
  EXPECT_NEAR(d, 17.72, 0.02);
  EXPECT_NEAR(d, inscribed_footprint(10), 1e-9);
  EXPECT_NEAR(d, std::sqrt(std::numbers::pi * 100), 0.02);

  const Geometry square = Geometry::polygon({{0, 0}, {30, 0}, {30, 30}, {0, 30}});
  EXPECT_NEAR(scale_distance(square, 0, {30, 80}), 0.0, 1e-12);
  EXPECT_NEAR(scale_distance(square, 0, {45, 45}), 15.0, 1e-12);
  EXPECT_NEAR(scale_distance(square, 0, {10, 80}), 20.0, 1e-12);
  EXPECT_NEAR(scale_distance(square, 0, {10, 80}, true), 0.0, 1e-12);
  EXPECT_THROW(scale_distance(square, 0, {50, 10}), std::invalid_argument);
  EXPECT_THROW(scale_distance(square, -1, {0, 10}), std::invalid_argument);
}

TEST(ComputeMetrics, IdenticalCandidateIsAllZero) {
  testing::SmallWorld w;
  auto o = w.point_object("12 rue du Temple", {5, 5});
  o.period = FuzzyPeriod::instant(1850);
  const auto id = w.registry.insert_objects(w.numbers, {o})[0];
  MetricQuery q;
  q.address = normalize("12 rue du Temple");
  q.period = FuzzyPeriod::instant(1850);
  const auto m = compute_metrics(q, *w.registry.find_object(id));
  EXPECT_EQ(m.w_d, 0.0);
  EXPECT_EQ(m.t_d, 0.0);
  EXPECT_EQ(m.b_d, 0.0);
  EXPECT_EQ(m.g_d, 0.0);
  EXPECT_TRUE(m.number_compared);
  EXPECT_TRUE(m.t_d_available);
  EXPECT_FALSE(m.g_d_available);
}

TEST(ComputeMetrics, AccuracyAddsDigitizingPrecision) {
  GazetteerRegistry r;
  const auto s = r.register_source({{}, "Alphand atlas", "", FuzzyPeriod::instant(1888), 20.0});
  const auto p = r.register_process({{}, "manual vectorization", "", 5.0});
  const auto g = r.create_gazetteer("alphand_streets", ScaleClass::rough);
  GeoHistoricalObject o;
  o.historical_name = "rue du Temple";
  o.normalized_name = "rue du temple";
  o.source = s;
  o.process = p;
  o.geometry = Geometry::polyline({{0, 0}, {100, 0}});
  o.scale_class = ScaleClass::rough;
  const auto id = r.insert_objects(g, {o})[0];
  MetricQuery q;
  q.address = normalize("12 rue du Temple");
  const auto m = compute_metrics(q, *r.find_object(id));
  EXPECT_DOUBLE_EQ(m.s_p, 25.0);
  EXPECT_FALSE(m.number_compared);
  EXPECT_FALSE(m.t_d_available);
}

TEST(ComputeMetrics, VannerieHasSmallerStringButLargerTemporalDistance) {
  testing::SmallWorld w;
  auto vannerie = w.point_object("12 r. de la Vannerie Paris", {0, 0});
  vannerie.period = FuzzyPeriod::instant(1810);
  auto tannerie = w.point_object("12 r. de la Tannerie Paris", {0, 0});
  tannerie.period = FuzzyPeriod::instant(1860);
  const auto ids = w.registry.insert_objects(w.numbers, {vannerie, tannerie});
  MetricQuery q;
  q.address = normalize("12 rue de la Vannerie, Paris");
  q.period = FuzzyPeriod::instant(1854);
  const auto mv = compute_metrics(q, *w.registry.find_object(ids[0]));
  const auto mt = compute_metrics(q, *w.registry.find_object(ids[1]));
  EXPECT_LT(mv.w_d, mt.w_d);
  EXPECT_GT(mv.t_d, mt.t_d);
  const auto& e = ScoringExpression::default_expression();
  EXPECT_LT(e.evaluate(mv), e.evaluate(mt));
}

double oracle_point_segment(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy);
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

TEST(ComputeMetrics, AgreesWithSingleMetricOracles) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> coord(0, 1000), acc(0.5, 30), len(5, 200);
  std::uniform_int_distribution<int> number(1, 150), coin(0, 3);
  testing::SmallWorld w;
  for (int i = 0; i < 200; ++i) {
    const std::string street = testing::random_street(rng);
    const int n = number(rng);
    const bool segment = coin(rng) == 0;
    const Point at{coord(rng), coord(rng)};
    GeoHistoricalObject o = segment ? w.street_object(street, {at, {at.x + len(rng), at.y}})
                                    : w.point_object(std::to_string(n) + " " + street, at);
    if (coin(rng) != 0) o.period = oracle::random_period(rng);
    if (coin(rng) == 0) o.accuracy = acc(rng);
    const auto stored = w.registry.find_object(w.registry.insert_objects(segment ? w.streets : w.numbers, {o})[0]);

    MetricQuery q;
    const int qn = coin(rng) == 0 ? n : number(rng);
    q.address = normalize(std::to_string(qn) + " " + (coin(rng) == 0 ? street : testing::random_street(rng)));
    if (coin(rng) != 0) q.period = oracle::random_period(rng);
    const Point hint{coord(rng), coord(rng)};
    if (coin(rng) != 0) q.hint = Geometry::point(hint);
    q.scale = {10.0 * coin(rng), 40.0 + 50.0 * coin(rng)};

    const auto m = compute_metrics(q, *stored);
    ASSERT_EQ(m.w_d, oracle::string_distance(q.address.normalized, o.normalized_name));
    if (q.period) {
      const FuzzyPeriod cand = o.period ? *o.period : FuzzyPeriod(1827, 1827, 1836, 1836);
      ASSERT_NEAR(m.t_d, oracle::temporal_distance(*q.period, cand), 1e-3);
    } else {
      ASSERT_EQ(m.t_d, 0.0);
      ASSERT_FALSE(m.t_d_available);
    }
    if (!segment) {
      ASSERT_TRUE(m.number_compared);
      const int diff = std::abs(qn - n);
      ASSERT_EQ(m.b_d, diff % 2 == 0 ? diff : diff + 10);
    } else {
      ASSERT_FALSE(m.number_compared);
      ASSERT_EQ(m.b_d, 0.0);
    }
    const double sp = o.accuracy.value_or(5.0) + 5.0;
    ASSERT_DOUBLE_EQ(m.s_p, sp);
    double footprint = inscribed_footprint(sp);
    if (segment) {
      const double length = o.geometry.components()[0][0][1].x - at.x;
      footprint = std::sqrt(footprint * footprint + 2 * sp * length);
    }
    const double expected_sd = std::min(std::abs(footprint - q.scale.low), std::abs(footprint - q.scale.high));
    ASSERT_NEAR(m.s_d, expected_sd, 1e-6);
    if (q.hint) {
      const auto& path = o.geometry.components()[0][0];
      const double g = segment ? oracle_point_segment(hint, path[0], path[1]) : std::hypot(hint.x - at.x, hint.y - at.y);
      ASSERT_NEAR(m.g_d, g, 1e-9);
    } else {
      ASSERT_FALSE(m.g_d_available);
    }
  }
}

}  // namespace
}  // namespace histgeo
