#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "nestfc/archive.hpp"
#include "nestfc/conjugate.hpp"
#include "nestfc/gdp.hpp"
#include "nestfc/model.hpp"
#include "nestfc/sampler_common.hpp"

namespace nestfc {

/// Latent state of one mean-curve clustering chain.
struct MeanChainState {
  std::vector<int> z;                                   // subject -> atom (0-based)
  StickWeights sticks;                                  // length K
  std::vector<ClusterAtom> atoms;                       // length K
  std::vector<std::vector<Eigen::VectorXd>> theta_ij;   // replicate coefficients
  Eigen::MatrixXd omega;
  Eigen::MatrixXd sigma;
  double gamma = 0.5;
  double a = 1.0;
  double b = 1.0;
  std::uint64_t iteration = 0;
  Rng rng;
  LogScaleWalk walk_a, walk_b;
};

/// Truncated blocked Gibbs sampler for subjects clustered by (theta, sigma^2,
/// lambda) atoms under a GDP(a, b) prior, with replicate coefficients
/// theta_ij ~ N(Lambda theta, sigma^2 Sigma).
///
/// One sweep updates, in order: allocations with theta_ij integrated out;
/// sticks; atoms (conjugate spike-slab block, theta_ij integrated out);
/// theta_ij; Omega and Sigma (inverse-Wishart); gamma (Beta); a and b
/// (log-scale random-walk Metropolis).
class MeanSampler {
 public:
  /// Initial state: uniform allocations, atoms from G0, sticks from the prior,
  /// theta_ij from ridge fits with unit penalty.
  MeanSampler(const PreparedData& data, Hyperparams hyper, std::size_t K, SamplerOptions options,
              std::uint64_t seed);

  const MeanChainState& state() const { return state_; }
  MeanChainState& mutable_state() { return state_; }
  const Hyperparams& hyper() const { return hyper_; }
  std::size_t truncation() const { return K_; }

  /// log w_k + marginal log-likelihood of subject i under atom k.
  std::vector<double> subject_alloc_logprobs(std::size_t i) const;

  /// One full scan. `adapt` enables step-size tuning of the concentration walks.
  void sweep(bool adapt = false);

  /// Unnormalized log posterior of the current state (theta_ij integrated out).
  double log_posterior() const;

  /// Throws NumericalError when a state invariant is violated.
  void check_invariants() const;

  RetainedDraw snapshot() const;

 private:
  struct WhitenedSubject {
    SufficientStats stats;
    double half_log_det = 0.0;  // 0.5 * sum_j log|I + B Sigma B^T|
  };

  void refresh_whitening();
  double subject_loglik(std::size_t i, const ClusterAtom& atom) const;
  BaseMeasure base_measure() const;

  void update_allocations();
  void update_sticks();
  void update_atoms();
  void update_replicate_coefficients();
  void update_covariances();
  void update_gamma();
  void update_concentrations(bool adapt);

  const PreparedData& data_;
  Hyperparams hyper_;
  std::size_t K_;
  SamplerOptions options_;
  MeanChainState state_;
  std::vector<WhitenedSubject> whitened_;
  std::vector<std::vector<SufficientStats>> raw_;
};

/// Retained draws of one chain, or a sink callback receiving each retained draw.
using DrawSink = std::function<void(const RetainedDraw&)>;

struct RunSettings {
  std::size_t K = 40;
  std::size_t L = 30;  // nested only
  std::size_t sweeps = 1000;
  std::size_t burnin = 0;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
};

/// Runs `sweeps` scans, discarding the first `burnin` (adapting the
/// concentration walks there) and retaining every `thin`-th draw after.
void run_chain_mean(const PreparedData& data, const Hyperparams& hyper, const RunSettings& run,
                    const SamplerOptions& options, const DrawSink& sink);

std::vector<RetainedDraw> run_chain_mean(const PreparedData& data, const Hyperparams& hyper, const RunSettings& run,
                                         const SamplerOptions& options = {});

void validate_run_settings(const RunSettings& run);

}  // namespace nestfc
