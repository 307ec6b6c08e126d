#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace histgeo::georef {

/// Sheet/pixel coordinates on the map and planar reference meters.
struct ControlPoint {
  Eigen::Vector2d source;
  Eigen::Vector2d target;
};

enum class TransformKind { affine, polynomial, tps };

const char* to_string(TransformKind kind);

class GeorefError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Number of monomials x^i y^j with i + j <= order.
constexpr Eigen::Index monomial_count(int order) { return (order + 1) * (order + 2) / 2; }

/// Monomials in graded order: 1, x, y, x^2, xy, y^2, x^3, x^2y, xy^2, y^3.
Eigen::VectorXd monomials(const Eigen::Vector2d& p, int order);

/// A fitted forward mapping source -> target.
///
/// Affine and polynomial transforms hold one coefficient column per target
/// axis over the monomial basis. A thin-plate spline holds an affine part in
/// the same layout plus one kernel weight row per control point.
class Transform {
public:
  static Transform identity();

  TransformKind kind() const { return kind_; }
  int order() const { return order_; }
  const Eigen::MatrixX2d& coefficients() const { return coefficients_; }
  const Eigen::MatrixX2d& centers() const { return centers_; }
  const Eigen::MatrixX2d& weights() const { return weights_; }
  double regularization() const { return lambda_; }
  Eigen::Index parameter_count() const { return 2 * (coefficients_.rows() + weights_.rows()); }

  Eigen::Vector2d operator()(const Eigen::Vector2d& p) const;
  /// Columns are points.
  Eigen::Matrix2Xd apply(const Eigen::Ref<const Eigen::Matrix2Xd>& points) const;

private:
  friend Transform fit_polynomial(std::span<const ControlPoint>, int);
  friend Transform fit_tps(std::span<const ControlPoint>, double);

  TransformKind kind_ = TransformKind::affine;
  int order_ = 1;
  Eigen::MatrixX2d coefficients_;
  Eigen::MatrixX2d centers_;
  Eigen::MatrixX2d weights_;
  double lambda_ = 0.0;
};

/// Least squares over >= 3 non-collinear pairs. Throws GeorefError on rank
/// deficiency.
Transform fit_affine(std::span<const ControlPoint> gcps);

/// Per-axis least squares of total degree `order` in 1..3.
Transform fit_polynomial(std::span<const ControlPoint> gcps, int order);

/// Thin-plate spline with U(r) = r^2 ln r. lambda = 0 interpolates exactly;
/// lambda > 0 trades residual for smoothness.
Transform fit_tps(std::span<const ControlPoint> gcps, double lambda = 0.0);

/// Thin-plate kernel, U(0) = 0.
double tps_kernel(double r);

struct ResidualReport {
  Eigen::VectorXd residuals;  // |t(source) - target| per pair
  double rmse = 0.0;
  double max = 0.0;
};

ResidualReport residuals(const Transform& t, std::span<const ControlPoint> gcps);

/// Delimited text with columns src_x, src_y, dst_x, dst_y.
std::vector<ControlPoint> parse_gcps(std::string_view text);

nlohmann::json to_json(const Transform& t);
nlohmann::json to_json(const ResidualReport& r);

}  // namespace histgeo::georef
