#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "nestfc/archive.hpp"
#include "nestfc/conjugate.hpp"
#include "nestfc/gdp.hpp"
#include "nestfc/model.hpp"
#include "nestfc/sampler_common.hpp"
#include "nestfc/sampler_mean.hpp"

namespace nestfc {

/// Latent state of one nested-GDP chain. Atom (l, k) lives at index
/// k * L + l; curve allocations c[i][j] index l within the subject's top
/// component z[i].
struct NestedChainState {
  std::vector<int> z;
  std::vector<std::vector<int>> c;
  StickWeights top;                  // pi, length K
  std::vector<StickWeights> bottom;  // varpi_.k, K vectors of length L
  std::vector<ClusterAtom> atoms;    // K * L
  Eigen::MatrixXd omega;
  double gamma = 0.5;
  double nu2 = 0.04;
  double a1 = 1.0, b1 = 1.0, a2 = 1.0, b2 = 1.0;
  std::uint64_t iteration = 0;
  Rng rng;
  LogScaleWalk walk_a1, walk_b1, walk_a2, walk_b2;
};

/// Truncated blocked Gibbs sampler for the nested GDP: subjects pick a
/// distribution G*_k, each curve picks an atom of that distribution.
class NestedSampler {
 public:
  NestedSampler(const PreparedData& data, Hyperparams hyper, std::size_t K, std::size_t L, SamplerOptions options,
                std::uint64_t seed);

  const NestedChainState& state() const { return state_; }
  NestedChainState& mutable_state() { return state_; }
  std::size_t top_truncation() const { return K_; }
  std::size_t bottom_truncation() const { return L_; }
  std::size_t atom_index(std::size_t k, std::size_t l) const { return k * L_ + l; }

  /// log pi_k + sum_j log sum_l varpi_lk N(y_ij | B Lambda_lk theta_lk, sigma_lk^2 I).
  std::vector<double> subject_alloc_logprobs(std::size_t i) const;

  /// log varpi_{l z_i} + log N(y_ij | atom (l, z_i)).
  std::vector<double> curve_alloc_logprobs(std::size_t i, std::size_t j) const;

  void sweep(bool adapt = false);
  double log_posterior() const;
  void check_invariants() const;
  RetainedDraw snapshot() const;

 private:
  double curve_loglik(std::size_t i, std::size_t j, const ClusterAtom& atom) const;
  BaseMeasure base_measure() const;
  void tabulate_logliks();

  void update_allocations();
  void update_sticks();
  void update_atoms();
  void update_globals();
  void update_concentrations(bool adapt);

  const PreparedData& data_;
  Hyperparams hyper_;
  std::size_t K_, L_;
  SamplerOptions options_;
  NestedChainState state_;
  std::vector<std::vector<SufficientStats>> curves_;
  std::vector<std::size_t> curve_offset_;  // flattened curve index of (i, 0)
  std::vector<double> loglik_table_;       // curve x atom, refreshed each sweep
};

void run_chain_nested(const PreparedData& data, const Hyperparams& hyper, const RunSettings& run,
                      const SamplerOptions& options, const DrawSink& sink);

std::vector<RetainedDraw> run_chain_nested(const PreparedData& data, const Hyperparams& hyper, const RunSettings& run,
                                           const SamplerOptions& options = {});

}  // namespace nestfc
