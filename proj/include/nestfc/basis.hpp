#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nestfc {

/// `p` equally spaced knots on [lo, hi], both endpoints included. A single
/// knot is placed at `lo`; lo == hi is accepted only for p == 1.
std::vector<double> make_knots(double lo, double hi, std::size_t p);

/// Truncated power spline basis b_k(x) = (x - tau_k)_+^q with an implicit
/// intercept column. Column 0 is the constant 1, column k >= 1 belongs to
/// knot k. With q == 0 the basis is a step function and 0^0 is taken as 1.
class SplineBasis {
 public:
  SplineBasis(std::vector<double> knots, int degree);

  static SplineBasis equally_spaced(double lo, double hi, std::size_t p, int degree) {
    return SplineBasis(make_knots(lo, hi, p), degree);
  }

  const std::vector<double>& knots() const { return knots_; }
  int degree() const { return degree_; }
  Eigen::Index num_knots() const { return static_cast<Eigen::Index>(knots_.size()); }
  Eigen::Index num_columns() const { return num_knots() + 1; }

  Eigen::VectorXd eval(double x) const;

  /// Rows are eval(xs[t]) for each t.
  Eigen::MatrixXd design(std::span<const double> xs) const;

 private:
  double column(double x, std::size_t k) const;

  std::vector<double> knots_;
  int degree_;
};

}  // namespace nestfc
