#include "nestfc/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "nestfc/errors.hpp"

namespace nestfc {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

double log_diff_exp(double a, double b) {
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(-std::exp(b - a));
}

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success || !llt.matrixLLT().allFinite()) {
    throw NumericalError(std::string("Cholesky factorization failed: ") + what + " is not positive definite");
  }
  return llt;
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd jitter_spd(const Eigen::MatrixXd& m) {
  const double dim = static_cast<double>(m.rows());
  double bump = 1e-8 * m.trace() / dim;
  if (!(bump > 0.0)) bump = 1e-8;
  Eigen::MatrixXd out = 0.5 * (m + m.transpose());
  out.diagonal().array() += bump;
  return out;
}

bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

namespace density {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_multivariate_gamma(double x, Eigen::Index d) {
  double out = 0.25 * static_cast<double>(d * (d - 1)) * std::log(std::numbers::pi);
  for (Eigen::Index j = 0; j < d; ++j) out += std::lgamma(x - 0.5 * static_cast<double>(j));
  return out;
}
}  // namespace

double log_normal(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}

double log_gamma(double x, double shape, double rate) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_inverse_gamma(double x, double shape, double scale) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_beta_from_logs(double log_u, double log_1mu, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * log_u + (b - 1.0) * log_1mu;
}

double log_beta(double x, double a, double b) {
  if (x <= 0.0 || x >= 1.0) return -std::numeric_limits<double>::infinity();
  return log_beta_from_logs(std::log(x), std::log1p(-x), a, b);
}

double log_inverse_wishart(const Eigen::MatrixXd& x, double df, const Eigen::MatrixXd& scale) {
  const Eigen::Index d = x.rows();
  const auto x_llt = checked_llt(x, "inverse-Wishart argument");
  const auto s_llt = checked_llt(scale, "inverse-Wishart scale");
  const double trace = x_llt.solve(scale).trace();
  return 0.5 * df * log_det_from_llt(s_llt) - 0.5 * df * static_cast<double>(d) * std::numbers::ln2 -
         log_multivariate_gamma(0.5 * df, d) - 0.5 * (df + static_cast<double>(d) + 1.0) * log_det_from_llt(x_llt) -
         0.5 * trace;
}

}  // namespace density
}  // namespace nestfc
