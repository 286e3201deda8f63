#include "nestfc/conjugate.hpp"

#include <cmath>
#include <stdexcept>

#include "nestfc/errors.hpp"
#include "nestfc/numeric.hpp"

namespace nestfc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::vector<int> active_indices(std::span<const std::uint8_t> lambda) {
  std::vector<int> idx;
  for (std::size_t s = 0; s < lambda.size(); ++s)
    if (lambda[s]) idx.push_back(static_cast<int>(s));
  return idx;
}

/// Posterior quantities for one active set, in coordinates whitened by the
/// Cholesky factor of Omega_SS: theta_S = L_O theta_w, theta_w | sigma^2 ~
/// N(P^{-1} h_w, sigma^2 P^{-1}) with P = I + L_O^T G_SS L_O.
struct ActivePosterior {
  std::vector<int> active;
  Eigen::MatrixXd omega_chol;  // L_O
  Eigen::LLT<Eigen::MatrixXd> precision_llt;
  Eigen::VectorXd mean_w;
  double quad = 0.0;       // y'y - h_w' P^{-1} h_w
  double log_det_p = 0.0;  // log|Omega_SS| + log|Omega_SS^{-1} + G_SS|
};

ActivePosterior active_posterior(const SufficientStats& stats, std::span<const std::uint8_t> lambda,
                                 const Eigen::MatrixXd& omega) {
  ActivePosterior out;
  out.active = active_indices(lambda);
  const Eigen::MatrixXd omega_ss = omega(out.active, out.active);
  out.omega_chol = checked_llt(omega_ss, "Omega restricted to active coefficients").matrixL();
  const auto m = static_cast<Eigen::Index>(out.active.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd h_w = Eigen::VectorXd::Zero(m);
  if (!stats.empty()) {
    const Eigen::MatrixXd g_ss = stats.gram(out.active, out.active);
    p.noalias() += out.omega_chol.transpose() * g_ss * out.omega_chol;
    h_w = out.omega_chol.transpose() * stats.cross(out.active);
  }
  out.precision_llt = checked_llt(0.5 * (p + p.transpose()), "atom posterior precision");
  out.mean_w = out.precision_llt.solve(h_w);
  out.quad = std::max(stats.yy - h_w.dot(out.mean_w), 0.0);
  out.log_det_p = log_det_from_llt(out.precision_llt);
  return out;
}

double log_marginal_from(const ActivePosterior& post, const SufficientStats& stats, const BaseMeasure& base) {
  const double n = stats.count;
  const double shape = base.nu1() + 0.5 * n;
  return -0.5 * n * kLog2Pi - 0.5 * post.log_det_p + base.nu1() * std::log(base.nu2()) - std::lgamma(base.nu1()) +
         std::lgamma(shape) - shape * std::log(base.nu2() + 0.5 * post.quad);
}

}  // namespace

SufficientStats SufficientStats::of_curve(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  SufficientStats s;
  s.gram = design.transpose() * design;
  s.cross = design.transpose() * y;
  s.yy = y.squaredNorm();
  s.count = static_cast<double>(y.size());
  return s;
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& other) {
  if (gram.size() == 0) {
    *this = other;
    return *this;
  }
  gram += other.gram;
  cross += other.cross;
  yy += other.yy;
  count += other.count;
  return *this;
}

double SufficientStats::loglik(const Eigen::VectorXd& beta, double sigma2) const {
  if (empty()) return 0.0;
  const double rss = std::max(yy - 2.0 * cross.dot(beta) + beta.dot(gram * beta), 0.0);
  return -0.5 * count * (kLog2Pi + std::log(sigma2)) - 0.5 * rss / sigma2;
}

BaseMeasure::BaseMeasure(Eigen::MatrixXd omega, double nu1, double nu2, double gamma)
    : omega_(std::move(omega)), nu1_(nu1), nu2_(nu2), gamma_(gamma) {
  if (!(nu1_ > 0.0) || !(nu2_ > 0.0)) throw std::invalid_argument("inverse-Gamma parameters must be positive");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw std::invalid_argument("inclusion probability must lie in (0, 1)");
  const auto llt = checked_llt(omega_, "Omega");
  omega_chol_ = llt.matrixL();
  omega_log_det_ = log_det_from_llt(llt);
}

ClusterAtom BaseMeasure::sample(Rng& rng) const {
  ClusterAtom atom;
  const Eigen::Index d = dim();
  atom.lambda.assign(static_cast<std::size_t>(d), 1);
  for (Eigen::Index s = 1; s < d; ++s) atom.lambda[static_cast<std::size_t>(s)] = random::bernoulli(rng, gamma_) ? 1 : 0;
  atom.sigma2 = random::inverse_gamma(rng, nu1_, nu2_);
  atom.theta = random::mvn_chol(rng, Eigen::VectorXd::Zero(d), std::sqrt(atom.sigma2) * omega_chol_);
  return atom;
}

double BaseMeasure::log_density(const ClusterAtom& atom) const {
  const Eigen::Index d = dim();
  const Eigen::VectorXd w = omega_chol_.triangularView<Eigen::Lower>().solve(atom.theta);
  double out = -0.5 * (static_cast<double>(d) * (kLog2Pi + std::log(atom.sigma2)) + omega_log_det_ +
                       w.squaredNorm() / atom.sigma2);
  out += density::log_inverse_gamma(atom.sigma2, nu1_, nu2_);
  for (Eigen::Index s = 1; s < d; ++s) {
    out += atom.lambda[static_cast<std::size_t>(s)] ? std::log(gamma_) : std::log1p(-gamma_);
  }
  return out;
}

double log_marginal_likelihood(const SufficientStats& stats, std::span<const std::uint8_t> lambda,
                               const BaseMeasure& base) {
  return log_marginal_from(active_posterior(stats, lambda, base.omega()), stats, base);
}

ClusterAtom update_atom(Rng& rng, const SufficientStats& stats, const BaseMeasure& base,
                        std::vector<std::uint8_t> lambda) {
  if (stats.empty()) return base.sample(rng);
  const Eigen::Index d = base.dim();
  if (static_cast<Eigen::Index>(lambda.size()) != d) throw std::invalid_argument("lambda has the wrong length");
  lambda[0] = 1;

  const double log_prior_odds = std::log(base.gamma()) - std::log1p(-base.gamma());
  double current = log_marginal_likelihood(stats, lambda, base);
  for (Eigen::Index s = 1; s < d; ++s) {
    auto& flag = lambda[static_cast<std::size_t>(s)];
    const std::uint8_t old = flag;
    flag = old ? 0 : 1;
    const double flipped = log_marginal_likelihood(stats, lambda, base);
    const double log_on = old ? current : flipped;
    const double log_off = old ? flipped : current;
    const double log_odds = log_on - log_off + log_prior_odds;
    const double p_on = 1.0 / (1.0 + std::exp(-log_odds));
    flag = random::uniform(rng) < p_on ? 1 : 0;
    current = flag ? log_on : log_off;
  }

  const auto post = active_posterior(stats, lambda, base.omega());
  ClusterAtom atom;
  atom.lambda = lambda;
  atom.sigma2 = random::inverse_gamma(rng, base.nu1() + 0.5 * stats.count, base.nu2() + 0.5 * post.quad);

  const auto m = static_cast<Eigen::Index>(post.active.size());
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z(i) = random::normal(rng);
  const Eigen::VectorXd theta_w = post.mean_w + std::sqrt(atom.sigma2) * post.precision_llt.matrixU().solve(z);
  const Eigen::VectorXd theta_s = post.omega_chol * theta_w;

  atom.theta = Eigen::VectorXd::Zero(d);
  if (m == d) {
    atom.theta = theta_s;
  } else {
    // Conditional draw of the excluded block by perturbing a joint prior
    // draw: theta_-S = prior_-S + Omega_-S,S Omega_SS^{-1} (theta_S - prior_S).
    const Eigen::VectorXd prior = random::mvn_chol(rng, Eigen::VectorXd::Zero(d), std::sqrt(atom.sigma2) * base.omega_chol());
    std::vector<int> inactive;
    for (Eigen::Index s = 0; s < d; ++s)
      if (!lambda[static_cast<std::size_t>(s)]) inactive.push_back(static_cast<int>(s));
    const Eigen::VectorXd gap = theta_s - prior(post.active);
    // Omega_SS^{-1} gap via the stored factor
    const Eigen::VectorXd solved =
        post.omega_chol.transpose().triangularView<Eigen::Upper>().solve(
            post.omega_chol.triangularView<Eigen::Lower>().solve(gap));
    const Eigen::VectorXd rest = prior(inactive) + base.omega()(inactive, post.active) * solved;
    atom.theta(post.active) = theta_s;
    atom.theta(inactive) = rest;
  }
  return atom;
}

}  // namespace nestfc
