#include "nestfc/gdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "nestfc/numeric.hpp"

namespace nestfc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_n(std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample size must be at least 1");
}
}  // namespace

void GdpParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("GDP shapes must be finite and positive");
  }
}

StickWeights StickWeights::from_fractions(std::span<const double> u) {
  if (u.empty()) throw std::invalid_argument("stick fractions must be non-empty");
  for (double v : u) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("stick fractions must lie in [0, 1]");
  }
  if (u.back() != 1.0) throw std::invalid_argument("the final stick fraction must be 1");
  StickWeights out;
  out.fractions_.assign(u.begin(), u.end());
  out.log_u_.resize(u.size());
  out.log_1mu_.resize(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    out.log_u_[k] = std::log(u[k]);
    out.log_1mu_[k] = std::log1p(-u[k]);
  }
  out.finish();
  return out;
}

StickWeights StickWeights::from_log_fractions(std::span<const double> log_u, std::span<const double> log_1mu) {
  if (log_u.empty() || log_u.size() != log_1mu.size()) {
    throw std::invalid_argument("log stick fractions must be non-empty and of equal length");
  }
  StickWeights out;
  out.log_u_.assign(log_u.begin(), log_u.end());
  out.log_1mu_.assign(log_1mu.begin(), log_1mu.end());
  out.log_u_.back() = 0.0;
  out.log_1mu_.back() = kNegInf;
  out.fractions_.resize(log_u.size());
  for (std::size_t k = 0; k < log_u.size(); ++k) out.fractions_[k] = std::exp(out.log_u_[k]);
  out.finish();
  return out;
}

void StickWeights::finish() {
  const std::size_t K = fractions_.size();
  weights_.resize(K);
  log_weights_.resize(K);
  double log_rest = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    log_weights_[k] = log_u_[k] + log_rest;
    weights_[k] = std::exp(log_weights_[k]);
    log_rest += log_1mu_[k];
  }
}

StickWeights sample_sticks(Rng& rng, const GdpParams& params, std::size_t truncation) {
  params.validate();
  if (truncation == 0) throw std::invalid_argument("truncation must be at least 1");
  std::vector<double> log_u(truncation, 0.0), log_1mu(truncation, kNegInf);
  for (std::size_t k = 0; k + 1 < truncation; ++k) {
    const auto draw = random::beta_log(rng, params.a, params.b);
    log_u[k] = draw.log_u;
    log_1mu[k] = draw.log_1mu;
  }
  return StickWeights::from_log_fractions(log_u, log_1mu);
}

Partition::Partition(std::span<const int> labels) {
  std::unordered_map<int, int> relabel;
  labels_.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = relabel.try_emplace(l, static_cast<int>(relabel.size()));
    if (inserted) block_sizes_.push_back(0);
    ++block_sizes_[static_cast<std::size_t>(it->second)];
    labels_.push_back(it->second);
  }
}

PartitionStats partition_stats(const Partition& p) {
  if (p.size() == 0) throw std::invalid_argument("partition must be non-empty");
  const auto& sizes = p.block_sizes();
  return {sizes.size(), *std::max_element(sizes.begin(), sizes.end()),
          static_cast<double>(p.size()) / static_cast<double>(sizes.size())};
}

double expected_new_cluster(const GdpParams& params, std::size_t n) {
  params.validate();
  require_n(n);
  const double a = params.a, b = params.b, i = static_cast<double>(n);
  // E(W_i) = i a Γ(a+b) Γ(b+i-1) / (Γ(b) Γ(a+b+i) - Γ(a+b) Γ(b+i)). Dividing
  // through by Γ(b) Γ(a+b+i) leaves 1 - E{(1-u)^i} in the denominator.
  const double lg_base = std::lgamma(b) + std::lgamma(a + b + i);
  const double log_num = std::log(i) + std::log(a) + std::lgamma(a + b) + std::lgamma(b + i - 1.0) - lg_base;
  const double log_moment = std::lgamma(a + b) + std::lgamma(b + i) - lg_base;
  const double denom = -std::expm1(log_moment);
  const double out = std::exp(log_num) / denom;
  if (!std::isfinite(out) || !(denom > 0.0)) {
    throw std::overflow_error("E(W_n) is not representable for these shapes");
  }
  return out;
}

double expected_clusters(const GdpParams& params, std::size_t n) {
  params.validate();
  require_n(n);
  double total = 0.0;
  for (std::size_t i = 1; i <= n; ++i) total += expected_new_cluster(params, i);
  return total;
}

NewClusterRate expected_new_cluster_rate(const GdpParams& params, std::size_t n) {
  const double exact = expected_new_cluster(params, n);
  const double a = params.a, b = params.b;
  const double log_lead = std::log(a) + std::lgamma(a + b) - std::lgamma(b) - a * std::log(static_cast<double>(n));
  return {exact, std::exp(log_lead - 2.0 * (a + 1.0)), std::exp(log_lead)};
}

namespace {

/// Sequential exact prior draw. Item t lands in the first stick k whose
/// remaining mass prod_{s<=k}(1-u_s) falls below 1 - v_t.
template <typename OnItem>
void sequential_draw(Rng& rng, const GdpParams& params, std::size_t n, OnItem&& on_item) {
  params.validate();
  require_n(n);
  std::vector<double> log_remaining;  // strictly decreasing in k unless a stick underflows
  double log_rest = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double log_r = std::log(1.0 - random::uniform(rng));  // log of (0, 1]
    while (log_remaining.empty() || !(log_remaining.back() < log_r)) {
      log_rest += random::beta_log(rng, params.a, params.b).log_1mu;
      log_remaining.push_back(log_rest);
    }
    // first k with log_remaining[k] < log_r
    const auto it = std::partition_point(log_remaining.begin(), log_remaining.end(),
                                         [log_r](double v) { return !(v < log_r); });
    on_item(static_cast<int>(it - log_remaining.begin()));
  }
}

}  // namespace

Partition simulate_partition(Rng& rng, const GdpParams& params, std::size_t n) {
  std::vector<int> labels;
  labels.reserve(n);
  sequential_draw(rng, params, n, [&](int k) { labels.push_back(k); });
  return Partition(labels);
}

std::vector<std::size_t> simulate_cluster_counts(Rng& rng, const GdpParams& params, std::size_t n) {
  std::vector<std::size_t> counts;
  counts.reserve(n);
  std::vector<bool> seen;
  std::size_t distinct = 0;
  sequential_draw(rng, params, n, [&](int k) {
    const auto idx = static_cast<std::size_t>(k);
    if (idx >= seen.size()) seen.resize(idx + 1, false);
    if (!seen[idx]) {
      seen[idx] = true;
      ++distinct;
    }
    counts.push_back(distinct);
  });
  return counts;
}

StructureSummary partition_structure(Rng& rng, const GdpParams& params, std::size_t n, std::size_t reps) {
  if (reps == 0) throw std::invalid_argument("at least one replicate is required");
  double sum_z = 0.0, sum_z2 = 0.0, sum_largest = 0.0, sum_mean = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto stats = partition_stats(simulate_partition(rng, params, n));
    const auto z = static_cast<double>(stats.num_clusters);
    sum_z += z;
    sum_z2 += z * z;
    sum_largest += static_cast<double>(stats.largest_block);
    sum_mean += stats.mean_block_size;
  }
  const double m = static_cast<double>(reps);
  const double mean_z = sum_z / m;
  const double var_z = reps > 1 ? (sum_z2 - m * mean_z * mean_z) / (m - 1.0) : 0.0;
  return {mean_z, sum_largest / m, sum_mean / m, std::sqrt(std::max(var_z, 0.0) / m)};
}

namespace {

void validate_shapes(const NestedShapes& s) {
  for (double v : {s.a1, s.b1, s.a2, s.b2}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("nested GDP shapes must be finite and positive");
  }
}

/// J log(1 - r^{level-1}) with r = b/(a+b).
double log_survival(double a, double b, std::size_t level, double copies) {
  if (level == 0) throw std::invalid_argument("truncation level must be at least 1");
  const double log_r = std::log(b) - std::log(a + b);
  const double x = std::exp(static_cast<double>(level - 1) * log_r);
  if (x >= 1.0) return kNegInf;
  return copies * std::log1p(-x);
}

}  // namespace

double truncation_bound_case(TruncationCase which, const NestedShapes& shapes, Truncation K, Truncation L,
                             std::size_t J, std::size_t n) {
  validate_shapes(shapes);
  if (J == 0 || n == 0) throw std::invalid_argument("J and n must be at least 1");
  const double j = static_cast<double>(J);
  const double nj = static_cast<double>(n) * j;
  double log_keep = 0.0;
  switch (which) {
    case TruncationCase::top_only:
      if (!K) throw std::invalid_argument("the top-only bound needs a finite K");
      if (L) throw std::invalid_argument("the top-only bound needs L infinite");
      log_keep = log_survival(shapes.a1, shapes.b1, *K, j);
      break;
    case TruncationCase::bottom_only:
      if (!L) throw std::invalid_argument("the bottom-only bound needs a finite L");
      if (K) throw std::invalid_argument("the bottom-only bound needs K infinite");
      log_keep = log_survival(shapes.a2, shapes.b2, *L, nj);
      break;
    case TruncationCase::both:
      if (!K || !L) throw std::invalid_argument("the two-level bound needs finite K and L");
      log_keep = log_survival(shapes.a1, shapes.b1, *K, j) + log_survival(shapes.a2, shapes.b2, *L, nj);
      break;
  }
  return -4.0 * std::expm1(log_keep);
}

double truncation_bound(const NestedShapes& shapes, Truncation K, Truncation L, std::size_t J, std::size_t n) {
  if (!K && !L) {
    validate_shapes(shapes);
    return 0.0;
  }
  const auto which = K && L ? TruncationCase::both : (K ? TruncationCase::top_only : TruncationCase::bottom_only);
  return truncation_bound_case(which, shapes, K, L, J, n);
}

}  // namespace nestfc
