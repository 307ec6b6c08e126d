#include "histgeo/georef.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "histgeo/csv.hpp"

namespace histgeo::georef {

namespace {

// Pivots below this fraction of the largest one count as zero.
constexpr double kRankThreshold = 1e-10;

Eigen::MatrixX2d targets(std::span<const ControlPoint> gcps) {
  Eigen::MatrixX2d t(gcps.size(), 2);
  for (std::size_t i = 0; i < gcps.size(); ++i) t.row(i) = gcps[i].target.transpose();
  return t;
}

void require_finite(std::span<const ControlPoint> gcps) {
  for (const auto& g : gcps) {
    if (!g.source.allFinite() || !g.target.allFinite()) throw GeorefError("control point coordinates must be finite");
  }
}

Eigen::Index affine_rank(std::span<const ControlPoint> gcps) {
  Eigen::MatrixXd p(gcps.size(), 3);
  for (std::size_t i = 0; i < gcps.size(); ++i) p.row(i) << 1.0, gcps[i].source.x(), gcps[i].source.y();
  const Eigen::VectorXd scale = p.colwise().norm().cwiseMax(1e-300).cwiseInverse();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p * scale.asDiagonal());
  qr.setThreshold(kRankThreshold);
  return qr.rank();
}

}  // namespace

const char* to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::affine: return "affine";
    case TransformKind::polynomial: return "polynomial";
    case TransformKind::tps: return "tps";
  }
  return "affine";
}

Eigen::VectorXd monomials(const Eigen::Vector2d& p, int order) {
  Eigen::VectorXd m(monomial_count(order));
  Eigen::Index k = 0;
  for (int degree = 0; degree <= order; ++degree) {
    for (int j = 0; j <= degree; ++j) m(k++) = std::pow(p.x(), degree - j) * std::pow(p.y(), j);
  }
  return m;
}

double tps_kernel(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

Transform Transform::identity() {
  Transform t;
  t.coefficients_ = Eigen::MatrixX2d::Zero(3, 2);
  t.coefficients_(1, 0) = 1.0;
  t.coefficients_(2, 1) = 1.0;
  return t;
}

Eigen::Vector2d Transform::operator()(const Eigen::Vector2d& p) const {
  Eigen::Vector2d out = coefficients_.transpose() * monomials(p, order_);
  for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
    out += tps_kernel((p - centers_.row(i).transpose()).norm()) * weights_.row(i).transpose();
  }
  return out;
}

Eigen::Matrix2Xd Transform::apply(const Eigen::Ref<const Eigen::Matrix2Xd>& points) const {
  Eigen::Matrix2Xd out(2, points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) out.col(i) = (*this)(points.col(i));
  return out;
}

Transform fit_affine(std::span<const ControlPoint> gcps) {
  return fit_polynomial(gcps, 1);
}

Transform fit_polynomial(std::span<const ControlPoint> gcps, int order) {
  if (order < 1 || order > 3) throw GeorefError("polynomial order must be 1, 2 or 3");
  require_finite(gcps);
  const Eigen::Index terms = monomial_count(order);
  if (static_cast<Eigen::Index>(gcps.size()) < terms) {
    throw GeorefError("order " + std::to_string(order) + " needs at least " + std::to_string(terms) +
                      " control points, got " + std::to_string(gcps.size()));
  }
  Eigen::MatrixXd design(gcps.size(), terms);
  for (std::size_t i = 0; i < gcps.size(); ++i) design.row(i) = monomials(gcps[i].source, order).transpose();
  // Column equilibration keeps the rank test meaningful for large coordinates.
  const Eigen::VectorXd scale = design.colwise().norm().cwiseMax(1e-300).cwiseInverse();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design * scale.asDiagonal());
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < terms) throw GeorefError("control points are degenerate (collinear or repeated) for this model");

  Transform t;
  t.kind_ = order == 1 ? TransformKind::affine : TransformKind::polynomial;
  t.order_ = order;
  t.coefficients_ = scale.asDiagonal() * qr.solve(targets(gcps));
  return t;
}

Transform fit_tps(std::span<const ControlPoint> gcps, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw GeorefError("regularization must be a finite value >= 0");
  require_finite(gcps);
  const auto n = static_cast<Eigen::Index>(gcps.size());
  if (n < 3) throw GeorefError("thin-plate spline needs at least 3 control points");
  if (lambda == 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (gcps[i].source == gcps[j].source) {
          throw GeorefError("duplicate source point at rows " + std::to_string(i + 1) + " and " + std::to_string(j + 1));
        }
      }
    }
  }
  if (affine_rank(gcps) < 3) throw GeorefError("control points are collinear");

  // Solve in centered, unit-scaled source coordinates l = (c - m) / s.
  // U(r / s) = U(r) / s^2 - ln(s) r^2 / s^2, and under the side conditions
  // sum(w) = 0, sum(w l) = 0 the r^2 part collapses to a constant.
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  for (const auto& g : gcps) center += g.source;
  center /= static_cast<double>(n);
  double scale = 0.0;
  for (const auto& g : gcps) scale = std::max(scale, (g.source - center).norm());
  Eigen::MatrixX2d local(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) local.row(i) = ((gcps[i].source - center) / scale).transpose();

  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(n + 3, n + 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) system(i, j) = tps_kernel((local.row(i) - local.row(j)).norm());
    system(i, i) += lambda / (scale * scale);
    system.block<1, 3>(i, n) << 1.0, local(i, 0), local(i, 1);
  }
  system.block(n, 0, 3, n) = system.block(0, n, n, 3).transpose();
  Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(n + 3, 2);
  rhs.topRows(n) = targets(gcps);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw GeorefError("thin-plate spline system is singular");
  const Eigen::MatrixX2d solution = lu.solve(rhs);
  const Eigen::Matrix<double, 3, 2> a = solution.bottomRows(3);

  Transform t;
  t.kind_ = TransformKind::tps;
  t.order_ = 1;
  t.lambda_ = lambda;
  t.weights_ = solution.topRows(n) / (scale * scale);
  t.coefficients_ = Eigen::MatrixX2d(3, 2);
  t.coefficients_.bottomRows(2) = a.bottomRows(2) / scale;
  t.coefficients_.row(0) = a.row(0) - center.transpose() * t.coefficients_.bottomRows(2) -
                           std::log(scale) * (local.rowwise().squaredNorm().transpose() * solution.topRows(n));
  t.centers_ = Eigen::MatrixX2d(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) t.centers_.row(i) = gcps[i].source.transpose();
  return t;
}

ResidualReport residuals(const Transform& t, std::span<const ControlPoint> gcps) {
  ResidualReport r;
  r.residuals.resize(static_cast<Eigen::Index>(gcps.size()));
  for (std::size_t i = 0; i < gcps.size(); ++i) r.residuals(i) = (t(gcps[i].source) - gcps[i].target).norm();
  if (!gcps.empty()) {
    r.rmse = std::sqrt(r.residuals.squaredNorm() / static_cast<double>(gcps.size()));
    r.max = r.residuals.maxCoeff();
  }
  return r;
}

std::vector<ControlPoint> parse_gcps(std::string_view text) {
  const CsvTable table = parse_csv_table(text);
  const char* names[] = {"src_x", "src_y", "dst_x", "dst_y"};
  std::size_t cols[4];
  for (int k = 0; k < 4; ++k) {
    const auto c = table.column(names[k]);
    if (!c) throw GeorefError(std::string("control point file lacks column ") + names[k]);
    cols[k] = *c;
  }
  std::vector<ControlPoint> out;
  for (const auto& row : table.rows) {
    double v[4];
    for (int k = 0; k < 4; ++k) {
      if (cols[k] >= row.fields.size()) throw GeorefError("line " + std::to_string(row.line) + ": missing " + names[k]);
      try {
        std::size_t used = 0;
        v[k] = std::stod(row.fields[cols[k]], &used);
        if (used != row.fields[cols[k]].size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw GeorefError("line " + std::to_string(row.line) + ": bad number in " + names[k]);
      }
    }
    out.push_back({{v[0], v[1]}, {v[2], v[3]}});
  }
  return out;
}

namespace {

nlohmann::json rows_to_json(const Eigen::MatrixX2d& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back({m(i, 0), m(i, 1)});
  return out;
}

}  // namespace

nlohmann::json to_json(const Transform& t) {
  nlohmann::json j;
  j["kind"] = to_string(t.kind());
  j["order"] = t.order();
  j["parameter_count"] = t.parameter_count();
  j["coefficients"] = rows_to_json(t.coefficients());
  if (t.kind() == TransformKind::tps) {
    j["regularization"] = t.regularization();
    j["centers"] = rows_to_json(t.centers());
    j["weights"] = rows_to_json(t.weights());
  }
  return j;
}

nlohmann::json to_json(const ResidualReport& r) {
  return {{"residuals", std::vector<double>(r.residuals.data(), r.residuals.data() + r.residuals.size())},
          {"rmse", r.rmse},
          {"max", r.max}};
}

}  // namespace histgeo::georef
