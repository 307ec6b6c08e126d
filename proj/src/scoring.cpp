#include "histgeo/scoring.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace histgeo {

double metric_value(const MetricVector& m, Metric which) {
  switch (which) {
    case Metric::w_d: return m.w_d;
    case Metric::t_d: return m.t_d;
    case Metric::b_d: return m.b_d;
    case Metric::s_p: return m.s_p;
    case Metric::s_d: return m.s_d;
    case Metric::g_d: return m.g_d;
  }
  return 0.0;
}

ExpressionError::ExpressionError(Kind kind, std::size_t position, const std::string& message)
    : std::invalid_argument(message + " at position " + std::to_string(position)), kind_(kind), position_(position) {}

using Node = ScoringExpression::Node;

class ExpressionParser {
public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  ScoringExpression run() {
    ScoringExpression e;
    e.source_ = std::string(text_);
    nodes_ = &e.nodes_;
    skip_space();
    if (pos_ == text_.size()) throw ExpressionError(ExpressionError::Kind::syntax, pos_, "empty scoring expression");
    e.root_ = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ExpressionError(ExpressionError::Kind::syntax, pos_, what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int add(Node n) {
    nodes_->push_back(std::move(n));
    return static_cast<int>(nodes_->size()) - 1;
  }

  int binary(Node::Op op, int lhs, int rhs) {
    Node n;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    return add(std::move(n));
  }

  int expr() {
    int lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(Node::Op::add, lhs, term());
      } else if (accept('-')) {
        lhs = binary(Node::Op::subtract, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  int term() {
    int lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = binary(Node::Op::multiply, lhs, unary());
      } else if (accept('/')) {
        lhs = binary(Node::Op::divide, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  int unary() {
    if (accept('-')) {
      Node n;
      n.op = Node::Op::negate;
      n.lhs = unary();
      return add(std::move(n));
    }
    return primary();
  }

  int primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      const int inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  int number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    Node n;
    n.op = Node::Op::number;
    const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, n.number);
    if (ec != std::errc{} || ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return add(std::move(n));
  }

  int identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });

    struct MetricName {
      const char* name;
      Metric metric;
    };
    static constexpr std::array<MetricName, 7> metrics{{{"w_d", Metric::w_d},
                                                        {"t_d", Metric::t_d},
                                                        {"b_d", Metric::b_d},
                                                        {"n_d", Metric::b_d},
                                                        {"s_p", Metric::s_p},
                                                        {"s_d", Metric::s_d},
                                                        {"g_d", Metric::g_d}}};
    for (const auto& m : metrics) {
      if (lower == m.name) {
        Node n;
        n.op = Node::Op::metric;
        n.metric = m.metric;
        n.spelling = lower;
        return add(std::move(n));
      }
    }

    struct FunctionName {
      const char* name;
      Node::Fn fn;
      int arity;
    };
    static constexpr std::array<FunctionName, 7> functions{{{"least", Node::Fn::least, 2},
                                                            {"greatest", Node::Fn::greatest, 2},
                                                            {"pow", Node::Fn::pow, 2},
                                                            {"abs", Node::Fn::abs, 1},
                                                            {"sqrt", Node::Fn::sqrt, 1},
                                                            {"ln", Node::Fn::ln, 1},
                                                            {"exp", Node::Fn::exp, 1}}};
    for (const auto& f : functions) {
      if (lower != f.name) continue;
      if (!accept('(')) fail("expected '(' after function '" + name + "'");
      std::vector<int> args;
      skip_space();
      if (!(pos_ < text_.size() && text_[pos_] == ')')) {
        args.push_back(expr());
        while (accept(',')) args.push_back(expr());
      }
      if (!accept(')')) fail("expected ')' to close call to '" + name + "'");
      if (static_cast<int>(args.size()) != f.arity) {
        throw ExpressionError(ExpressionError::Kind::arity, start,
                              "function '" + lower + "' takes " + std::to_string(f.arity) + " argument(s), got " +
                                  std::to_string(args.size()));
      }
      Node n;
      n.op = Node::Op::call;
      n.fn = f.fn;
      n.spelling = lower;
      n.lhs = args[0];
      n.rhs = args.size() > 1 ? args[1] : -1;
      return add(std::move(n));
    }
    throw ExpressionError(ExpressionError::Kind::unknown_identifier, start, "unknown identifier '" + name + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<Node>* nodes_ = nullptr;
};

ScoringExpression ScoringExpression::parse(std::string_view text) { return ExpressionParser(text).run(); }

const ScoringExpression& ScoringExpression::default_expression() {
  static const ScoringExpression e = parse(kDefaultScoring);
  return e;
}

double ScoringExpression::evaluate(const MetricVector& m) const {
  const double v = eval(root_, m);
  if (!std::isfinite(v)) throw EvaluationError("score is not finite");
  return v;
}

double ScoringExpression::eval(int index, const MetricVector& m) const {
  const Node& n = nodes_[static_cast<std::size_t>(index)];
  switch (n.op) {
    case Node::Op::number: return n.number;
    case Node::Op::metric: return metric_value(m, n.metric);
    case Node::Op::negate: return -eval(n.lhs, m);
    case Node::Op::add: return eval(n.lhs, m) + eval(n.rhs, m);
    case Node::Op::subtract: return eval(n.lhs, m) - eval(n.rhs, m);
    case Node::Op::multiply: return eval(n.lhs, m) * eval(n.rhs, m);
    case Node::Op::divide: {
      const double num = eval(n.lhs, m);
      const double den = eval(n.rhs, m);
      if (den == 0.0) throw EvaluationError("division by zero");
      return num / den;
    }
    case Node::Op::call: {
      const double x = eval(n.lhs, m);
      switch (n.fn) {
        case Node::Fn::least: return std::min(x, eval(n.rhs, m));
        case Node::Fn::greatest: return std::max(x, eval(n.rhs, m));
        case Node::Fn::abs: return std::abs(x);
        case Node::Fn::sqrt:
          if (x < 0.0) throw EvaluationError("sqrt of a negative value");
          return std::sqrt(x);
        case Node::Fn::ln:
          if (x <= 0.0) throw EvaluationError("ln of a non-positive value");
          return std::log(x);
        case Node::Fn::exp: return std::exp(x);
        case Node::Fn::pow: {
          const double v = std::pow(x, eval(n.rhs, m));
          if (!std::isfinite(v)) throw EvaluationError("pow result is not finite");
          return v;
        }
      }
    }
  }
  return 0.0;
}

std::string ScoringExpression::to_string() const {
  std::string out;
  print(root_, out);
  return out;
}

void ScoringExpression::print(int index, std::string& out) const {
  const Node& n = nodes_[static_cast<std::size_t>(index)];
  auto infix = [&](const char* op) {
    out += '(';
    print(n.lhs, out);
    out += op;
    print(n.rhs, out);
    out += ')';
  };
  switch (n.op) {
    case Node::Op::number: {
      std::array<char, 32> buf{};
      const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), n.number);
      out.append(buf.data(), ptr);
      break;
    }
    case Node::Op::metric: out += n.spelling; break;
    case Node::Op::negate:
      out += "(-";
      print(n.lhs, out);
      out += ')';
      break;
    case Node::Op::add: infix(" + "); break;
    case Node::Op::subtract: infix(" - "); break;
    case Node::Op::multiply: infix(" * "); break;
    case Node::Op::divide: infix(" / "); break;
    case Node::Op::call:
      out += n.spelling;
      out += '(';
      print(n.lhs, out);
      if (n.rhs >= 0) {
        out += ", ";
        print(n.rhs, out);
      }
      out += ')';
      break;
  }
}

double scale_distance_from_footprint(double footprint, ScaleRange range, bool zero_inside_range) {
  if (!(range.low <= range.high)) throw std::invalid_argument("scale range needs S_l <= S_h");
  if (zero_inside_range && footprint >= range.low && footprint <= range.high) return 0.0;
  return std::min(std::abs(footprint - range.low), std::abs(footprint - range.high));
}

double scale_distance(const Geometry& g, double precision, ScaleRange range, bool zero_inside_range) {
  if (!(range.low <= range.high)) throw std::invalid_argument("scale range needs S_l <= S_h");
  if (!(precision >= 0.0)) throw std::invalid_argument("precision must be >= 0");
  return scale_distance_from_footprint(std::sqrt(area(buffer(g, precision))), range, zero_inside_range);
}

MetricVector compute_metrics(const MetricQuery& query, const StoredObject& candidate) {
  MetricVector m;
  m.w_d = string_distance(query.address.normalized, candidate.object.normalized_name);
  if (query.period) {
    m.t_d = temporal_distance(*query.period, candidate.effective_period);
    m.t_d_available = true;
  }
  if (query.address.building_number && candidate.building_number) {
    m.b_d = building_number_distance(*query.address.building_number, *candidate.building_number);
    m.number_compared = true;
  }
  m.s_p = candidate.effective_accuracy;
  m.s_d = scale_distance_from_footprint(candidate.footprint, query.scale, query.scale_zero_inside_range);
  if (query.hint) {
    const Geometry& geom = candidate.object.geometry;
    m.g_d = query.hint->crs().empty() ? distance(query.hint->with_crs(geom.crs()), geom) : distance(*query.hint, geom);
    m.g_d_available = true;
  }
  return m;
}

}  // namespace histgeo
