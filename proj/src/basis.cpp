#include "nestfc/basis.hpp"

#include <cmath>
#include <stdexcept>

namespace nestfc {

std::vector<double> make_knots(double lo, double hi, std::size_t p) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("knot bounds must be finite");
  if (p == 0) throw std::invalid_argument("at least one knot is required");
  if (p == 1) {
    if (lo > hi) throw std::invalid_argument("knot bounds must satisfy lo <= hi");
    return {lo};
  }
  if (!(lo < hi)) throw std::invalid_argument("knot bounds must satisfy lo < hi");
  std::vector<double> knots(p);
  const double step = (hi - lo) / static_cast<double>(p - 1);
  for (std::size_t k = 0; k < p; ++k) knots[k] = lo + step * static_cast<double>(k);
  knots.back() = hi;
  return knots;
}

SplineBasis::SplineBasis(std::vector<double> knots, int degree) : knots_(std::move(knots)), degree_(degree) {
  if (knots_.empty()) throw std::invalid_argument("spline basis needs at least one knot");
  if (degree_ < 0) throw std::invalid_argument("spline degree must be non-negative");
  for (std::size_t k = 0; k < knots_.size(); ++k) {
    if (!std::isfinite(knots_[k])) throw std::invalid_argument("knots must be finite");
    if (k > 0 && !(knots_[k - 1] < knots_[k])) throw std::invalid_argument("knots must be strictly increasing");
  }
}

double SplineBasis::column(double x, std::size_t k) const {
  const double d = x - knots_[k];
  if (d < 0.0) return 0.0;
  double out = 1.0;
  for (int e = 0; e < degree_; ++e) out *= d;
  return out;
}

Eigen::VectorXd SplineBasis::eval(double x) const {
  Eigen::VectorXd row(num_columns());
  row(0) = 1.0;
  for (std::size_t k = 0; k < knots_.size(); ++k) row(static_cast<Eigen::Index>(k) + 1) = column(x, k);
  return row;
}

Eigen::MatrixXd SplineBasis::design(std::span<const double> xs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), num_columns());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    if (!std::isfinite(xs[t])) throw std::invalid_argument("covariate values must be finite");
    out.row(static_cast<Eigen::Index>(t)) = eval(xs[t]).transpose();
  }
  return out;
}

}  // namespace nestfc
