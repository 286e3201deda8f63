#include "nestfc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nestfc/numeric.hpp"

namespace nestfc::random {

double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

double log_gamma_variate(Rng& rng, double shape) {
  if (shape >= 1.0) {
    return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  }
  // Gamma(a) = Gamma(a + 1) * U^{1/a}
  const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  const double u = 1.0 - uniform(rng);  // (0, 1]
  return std::log(g) + std::log(u) / shape;
}

double gamma(Rng& rng, double shape, double rate) {
  if (shape >= 1.0) return std::gamma_distribution<double>(shape, 1.0)(rng) / rate;
  return std::exp(log_gamma_variate(rng, shape)) / rate;
}

double inverse_gamma(Rng& rng, double shape, double scale) {
  return 1.0 / gamma(rng, shape, scale);
}

double LogBeta::value() const { return std::exp(log_u); }

LogBeta beta_log(Rng& rng, double a, double b) {
  const double lx = log_gamma_variate(rng, a);
  const double ly = log_gamma_variate(rng, b);
  const double both[2] = {lx, ly};
  const double lse = log_sum_exp(both);
  return {lx - lse, ly - lse};
}

double beta(Rng& rng, double a, double b) { return beta_log(rng, a, b).value(); }

bool bernoulli(Rng& rng, double p) { return uniform(rng) < p; }

std::size_t categorical(Rng& rng, std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double target = uniform(rng) * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    cum += probs[k];
    last_positive = k;
    if (target < cum) return k;
  }
  return last_positive;
}

std::size_t categorical_log(Rng& rng, std::span<const double> log_probs) {
  const double lse = log_sum_exp(log_probs);
  std::vector<double> probs(log_probs.size());
  std::transform(log_probs.begin(), log_probs.end(), probs.begin(),
                 [lse](double lp) { return std::exp(lp - lse); });
  return categorical(rng, probs);
}

Eigen::VectorXd mvn_chol(Rng& rng, const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return mean + chol_lower.triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd mvn_precision(Rng& rng, const Eigen::MatrixXd& precision, const Eigen::VectorXd& b) {
  const auto llt = checked_llt(precision, "precision matrix");
  Eigen::VectorXd mean = llt.solve(b);
  Eigen::VectorXd z(b.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  // x = mean + L^{-T} z has covariance (L L^T)^{-1}
  Eigen::VectorXd dev = llt.matrixU().solve(z);
  return mean + dev;
}

Eigen::MatrixXd inverse_wishart(Rng& rng, double df, const Eigen::MatrixXd& scale) {
  const Eigen::Index d = scale.rows();
  const auto scale_llt = checked_llt(scale, "inverse-Wishart scale");
  const Eigen::MatrixXd scale_inv = scale_llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd c = checked_llt(0.5 * (scale_inv + scale_inv.transpose()), "inverse-Wishart scale")
                                .matrixL();
  // Bartlett decomposition of Wishart(df, scale^{-1}).
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double dof = df - static_cast<double>(i);
    a(i, i) = std::sqrt(2.0 * gamma(rng, 0.5 * dof, 1.0));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  const Eigen::MatrixXd m = c * a;  // lower triangular
  const Eigen::MatrixXd m_inv =
      m.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::MatrixXd x = m_inv.transpose() * m_inv;
  return 0.5 * (x + x.transpose());
}

}  // namespace nestfc::random
