#include "nestfc/sampler_common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nestfc/numeric.hpp"

namespace nestfc {

double LogScaleWalk::update(Rng& rng, double current, const std::function<double(double)>& log_target, bool adapt,
                            double target_acceptance) {
  const double proposal = current * std::exp(step_ * random::normal(rng));
  // log-scale proposal: the Jacobian contributes log(x)
  const double log_ratio = log_target(proposal) + std::log(proposal) - log_target(current) - std::log(current);
  const bool accept = std::log(1.0 - random::uniform(rng)) < log_ratio;
  ++proposed_;
  ++window_proposed_;
  if (accept) {
    ++accepted_;
    ++window_accepted_;
  }
  if (adapt && window_proposed_ == 50) {
    const double rate = static_cast<double>(window_accepted_) / 50.0;
    step_ *= rate > target_acceptance ? 1.2 : 1.0 / 1.2;
    step_ = std::clamp(step_, 1e-3, 10.0);
    window_accepted_ = window_proposed_ = 0;
  }
  if (!adapt) window_accepted_ = window_proposed_ = 0;
  return accept ? proposal : current;
}

StickWeights sample_stick_posterior(Rng& rng, std::span<const std::size_t> counts, double a, double b) {
  const std::size_t K = counts.size();
  if (K == 0) throw std::invalid_argument("stick counts must be non-empty");
  std::vector<double> log_u(K, 0.0), log_1mu(K, -std::numeric_limits<double>::infinity());
  std::size_t beyond = 0;
  for (std::size_t k = 0; k < K; ++k) beyond += counts[k];
  for (std::size_t k = 0; k + 1 < K; ++k) {
    beyond -= counts[k];
    const auto draw = random::beta_log(rng, a + static_cast<double>(counts[k]), b + static_cast<double>(beyond));
    log_u[k] = draw.log_u;
    log_1mu[k] = draw.log_1mu;
  }
  return StickWeights::from_log_fractions(log_u, log_1mu);
}

double sticks_log_prior(const StickWeights& sticks, double a, double b) {
  double out = 0.0;
  const auto& lu = sticks.log_fractions();
  const auto& l1 = sticks.log_complements();
  for (std::size_t k = 0; k + 1 < sticks.size(); ++k) out += density::log_beta_from_logs(lu[k], l1[k], a, b);
  return out;
}

}  // namespace nestfc
