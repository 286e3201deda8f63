#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nestfc/gdp.hpp"
#include "nestfc/rng.hpp"

namespace nestfc {

/// Switches shared by both samplers. Pinned concentrations are held at the
/// given value and never updated.
struct SamplerOptions {
  /// Ignore the likelihood entirely; the chain then targets the prior.
  bool prior_only = false;
  bool update_omega = true;
  bool update_gamma = true;
  bool update_sigma = true;  // mean model
  bool update_nu2 = true;    // nested model
  std::optional<double> fixed_a;   // a (mean) or a1 (nested)
  std::optional<double> fixed_b;   // b (mean) or b1 (nested)
  std::optional<double> fixed_a2;  // nested only
  std::optional<double> fixed_b2;  // nested only
  /// Replicate-level covariance held fixed (mean model); implies no Sigma update.
  std::optional<Eigen::MatrixXd> fixed_sigma;
  double target_acceptance = 0.35;
  /// Check stick normalization, allocation ranges and SPD-ness after every sweep.
  bool check_invariants =
#ifdef NDEBUG
      false;
#else
      true;
#endif
};

/// Gaussian random walk on log(x) for a positive concentration parameter.
/// While adapting, the step is rescaled every 50 proposals toward the target
/// acceptance rate; afterwards it stays frozen.
class LogScaleWalk {
 public:
  double step() const { return step_; }
  std::size_t accepted() const { return accepted_; }
  std::size_t proposed() const { return proposed_; }

  double update(Rng& rng, double current, const std::function<double(double)>& log_target, bool adapt,
                double target_acceptance);

 private:
  double step_ = 0.5;
  std::size_t accepted_ = 0, proposed_ = 0;
  std::size_t window_accepted_ = 0, window_proposed_ = 0;
};

/// u_k ~ Beta(a + n_k, b + sum_{l>k} n_l) for k < K, u_K = 1.
StickWeights sample_stick_posterior(Rng& rng, std::span<const std::size_t> counts, double a, double b);

/// sum_{k<K} log Beta(u_k | a, b); the final stick is excluded.
double sticks_log_prior(const StickWeights& sticks, double a, double b);

/// Frobenius norm.
inline double frobenius(const Eigen::MatrixXd& m) { return m.norm(); }

}  // namespace nestfc
