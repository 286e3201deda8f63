#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "nestfc/rng.hpp"

namespace nestfc {

/// Shapes of the Beta(a, b) stick fractions of a generalized Dirichlet
/// process. a = 1 recovers the Dirichlet process with precision b.
struct GdpParams {
  double a = 1.0;
  double b = 1.0;

  void validate() const;
};

/// Stick fractions u_k (last one fixed at 1) and the induced weights
/// w_k = u_k prod_{s<k} (1 - u_s).
class StickWeights {
 public:
  StickWeights() = default;

  /// Builds weights from fractions in [0, 1]; the last fraction must be 1.
  static StickWeights from_fractions(std::span<const double> u);

  /// Builds weights from fractions given on the log scale as
  /// (log u_k, log(1 - u_k)); the final stick is forced to 1.
  static StickWeights from_log_fractions(std::span<const double> log_u, std::span<const double> log_1mu);

  std::size_t size() const { return fractions_.size(); }
  const std::vector<double>& fractions() const { return fractions_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  /// log(1 - u_k); -inf for the final stick.
  const std::vector<double>& log_complements() const { return log_1mu_; }
  /// log u_k.
  const std::vector<double>& log_fractions() const { return log_u_; }

 private:
  void finish();

  std::vector<double> fractions_;
  std::vector<double> log_u_;
  std::vector<double> log_1mu_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
};

inline StickWeights stick_weights(std::span<const double> u) { return StickWeights::from_fractions(u); }

/// Truncated GDP sticks: u_k ~ Beta(a, b) for k < K and u_K = 1.
StickWeights sample_sticks(Rng& rng, const GdpParams& params, std::size_t truncation);

/// A partition of n items in canonical form: labels are 0, 1, ... in order of
/// first appearance.
class Partition {
 public:
  Partition() = default;
  /// Canonicalizes arbitrary integer labels.
  explicit Partition(std::span<const int> labels);

  const std::vector<int>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t num_clusters() const { return block_sizes_.size(); }
  const std::vector<std::size_t>& block_sizes() const { return block_sizes_; }

  bool operator==(const Partition& other) const { return labels_ == other.labels_; }

 private:
  std::vector<int> labels_;
  std::vector<std::size_t> block_sizes_;
};

struct PartitionStats {
  std::size_t num_clusters;
  std::size_t largest_block;
  double mean_block_size;
};

PartitionStats partition_stats(const Partition& p);

/// E(Z_n), the expected number of distinct values in n draws from a
/// GDP(a, b) random measure. Summands are evaluated in log-Gamma space.
double expected_clusters(const GdpParams& params, std::size_t n);

/// E(W_n) = E(Z_n) - E(Z_{n-1}): probability that draw n opens a new cluster.
double expected_new_cluster(const GdpParams& params, std::size_t n);

struct NewClusterRate {
  double exact;
  /// C(a, b) n^{-a} with the printed constant C(a, b) = a Γ(a+b)/Γ(b) e^{-2(a+1)}.
  double approx;
  /// a Γ(a+b)/Γ(b) n^{-a}, the leading-order term of `exact` as n grows.
  double leading_order;
};

NewClusterRate expected_new_cluster_rate(const GdpParams& params, std::size_t n);

/// Exact (untruncated) prior draw of the partition of n items. Sticks are
/// extended lazily until they cover each item's uniform draw.
Partition simulate_partition(Rng& rng, const GdpParams& params, std::size_t n);

/// Running cluster counts Z_1..Z_n along one exact prior draw.
std::vector<std::size_t> simulate_cluster_counts(Rng& rng, const GdpParams& params, std::size_t n);

struct StructureSummary {
  double mean_clusters;
  double mean_largest;
  double mean_block_size;
  double se_clusters;
};

/// Monte Carlo averages of partition_stats over `reps` exact prior draws.
StructureSummary partition_structure(Rng& rng, const GdpParams& params, std::size_t n, std::size_t reps);

/// Stick shapes of the nested GDP: (a1, b1) for the distribution level,
/// (a2, b2) for the observation level.
struct NestedShapes {
  double a1 = 1.0, b1 = 1.0, a2 = 1.0, b2 = 1.0;
};

/// Truncation level; std::nullopt stands for an infinite (untruncated) level.
using Truncation = std::optional<std::size_t>;

/// L1 bound between the prior predictive of the truncated and untruncated
/// nested GDP for J distributions with n observations each. Returns 0 when
/// both levels are infinite.
double truncation_bound(const NestedShapes& shapes, Truncation K, Truncation L, std::size_t J, std::size_t n);

enum class TruncationCase { top_only, bottom_only, both };

/// Evaluates one closed-form case explicitly; throws std::invalid_argument
/// when a level the case needs is infinite.
double truncation_bound_case(TruncationCase which, const NestedShapes& shapes, Truncation K, Truncation L,
                             std::size_t J, std::size_t n);

}  // namespace nestfc
