#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nestfc/model.hpp"
#include "nestfc/rng.hpp"

namespace nestfc {

/// Gram matrix, cross products and response norm of the curves pooled into
/// one atom. Whitened curves (mean model) and raw curves (nested model) are
/// both represented this way.
struct SufficientStats {
  Eigen::MatrixXd gram;
  Eigen::VectorXd cross;
  double yy = 0.0;
  double count = 0.0;

  SufficientStats() = default;
  explicit SufficientStats(Eigen::Index dim)
      : gram(Eigen::MatrixXd::Zero(dim, dim)), cross(Eigen::VectorXd::Zero(dim)) {}

  static SufficientStats of_curve(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

  SufficientStats& operator+=(const SufficientStats& other);
  bool empty() const { return count == 0.0; }

  /// sum of log N(y_t | x_t^T beta, sigma2).
  double loglik(const Eigen::VectorXd& beta, double sigma2) const;
};

/// G0 = N(theta | 0, sigma^2 Omega) x IG(sigma^2 | nu1, nu2) x prod_s Bern(lambda_s | gamma),
/// with the intercept always included.
class BaseMeasure {
 public:
  BaseMeasure(Eigen::MatrixXd omega, double nu1, double nu2, double gamma);

  const Eigen::MatrixXd& omega() const { return omega_; }
  const Eigen::MatrixXd& omega_chol() const { return omega_chol_; }
  double nu1() const { return nu1_; }
  double nu2() const { return nu2_; }
  double gamma() const { return gamma_; }
  Eigen::Index dim() const { return omega_.rows(); }

  ClusterAtom sample(Rng& rng) const;
  double log_density(const ClusterAtom& atom) const;

 private:
  Eigen::MatrixXd omega_;
  Eigen::MatrixXd omega_chol_;
  double omega_log_det_;
  double nu1_, nu2_, gamma_;
};

/// log p(y | lambda) with theta and sigma^2 integrated against G0.
double log_marginal_likelihood(const SufficientStats& stats, std::span<const std::uint8_t> lambda,
                               const BaseMeasure& base);

/// One conjugate block update of an atom given its pooled data: each
/// lambda_s (s >= 1) is redrawn in turn from its conditional with theta and
/// sigma^2 integrated out, then sigma^2 | lambda, then theta | sigma^2, lambda.
/// Excluded coefficients are drawn from their prior conditional given the
/// included ones. Empty atoms are drawn from G0 directly.
ClusterAtom update_atom(Rng& rng, const SufficientStats& stats, const BaseMeasure& base,
                        std::vector<std::uint8_t> lambda);

}  // namespace nestfc
