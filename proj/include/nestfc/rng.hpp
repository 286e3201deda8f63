#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace nestfc {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-chain seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace random {

double uniform(Rng& rng);
double normal(Rng& rng);

/// Gamma(shape, rate).
double gamma(Rng& rng, double shape, double rate);

/// log of a Gamma(shape, 1) variate; accurate for tiny shapes where the
/// variate itself underflows.
double log_gamma_variate(Rng& rng, double shape);

/// Inverse-Gamma(shape, scale): 1 / Gamma(shape, rate = scale).
double inverse_gamma(Rng& rng, double shape, double scale);

/// Beta variate returned on the log scale as (log u, log(1 - u)).
struct LogBeta {
  double log_u;
  double log_1mu;
  double value() const;
};
LogBeta beta_log(Rng& rng, double a, double b);
double beta(Rng& rng, double a, double b);

bool bernoulli(Rng& rng, double p);

/// Index drawn from normalized probabilities using a single uniform against
/// the cumulative sum.
std::size_t categorical(Rng& rng, std::span<const double> probs);

/// Index drawn from unnormalized log-probabilities (log-sum-exp normalized).
std::size_t categorical_log(Rng& rng, std::span<const double> log_probs);

/// N(mean, cov) given the lower Cholesky factor of cov.
Eigen::VectorXd mvn_chol(Rng& rng, const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower);

/// N(Q^{-1} b, Q^{-1}) from a precision matrix Q.
Eigen::VectorXd mvn_precision(Rng& rng, const Eigen::MatrixXd& precision, const Eigen::VectorXd& b);

/// Inverse-Wishart(df, scale) with density proportional to
/// |X|^{-(df+d+1)/2} exp(-tr(scale X^{-1})/2); mean scale/(df-d-1).
Eigen::MatrixXd inverse_wishart(Rng& rng, double df, const Eigen::MatrixXd& scale);

}  // namespace random
}  // namespace nestfc
