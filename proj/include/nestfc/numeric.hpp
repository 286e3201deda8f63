#pragma once

#include <span>

#include <Eigen/Dense>

namespace nestfc {

double log_sum_exp(std::span<const double> values);

/// log(exp(a) - exp(b)) for a >= b.
double log_diff_exp(double a, double b);

/// Lower Cholesky factor; throws NumericalError with `what` in the message
/// when the matrix is not positive definite.
Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& m, const char* what);

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt);

/// Adds 1e-8 * trace / dim to the diagonal.
Eigen::MatrixXd jitter_spd(const Eigen::MatrixXd& m);

bool is_spd(const Eigen::MatrixXd& m);

namespace density {

double log_normal(double x, double mean, double var);
double log_gamma(double x, double shape, double rate);
double log_inverse_gamma(double x, double shape, double scale);
double log_beta(double x, double a, double b);
/// Beta log-density from the pair (log u, log(1-u)).
double log_beta_from_logs(double log_u, double log_1mu, double a, double b);
double log_inverse_wishart(const Eigen::MatrixXd& x, double df, const Eigen::MatrixXd& scale);

}  // namespace density
}  // namespace nestfc
