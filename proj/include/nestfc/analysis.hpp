#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nestfc/archive.hpp"
#include "nestfc/gdp.hpp"
#include "nestfc/model.hpp"

namespace nestfc {

/// Co-clustering probabilities: entry (i, j) is the fraction of draws in
/// which items i and j share a label. Throws std::invalid_argument on an
/// empty draw set or inconsistent lengths.
Eigen::MatrixXd incidence_matrix(std::span<const std::vector<int>> draws);

/// sum_{i<j} (1[c_i = c_j] - p_ij)^2.
double binder_loss(std::span<const int> labels, const Eigen::MatrixXd& incidence);

struct PointPartition {
  Partition partition;
  std::size_t draw_index = 0;
  double loss = 0.0;
};

/// The draw with the smallest binder_loss. Ties go to the earliest draw.
PointPartition point_partition(std::span<const std::vector<int>> draws, const Eigen::MatrixXd& incidence);

/// Gelman-Rubin potential scale reduction factor. Returns nullopt when the
/// within-chain variance is zero. Throws std::invalid_argument with fewer
/// than two chains, fewer than two draws or ragged chains.
std::optional<double> psrf(std::span<const std::vector<double>> chains);

/// Throws std::invalid_argument on a length mismatch. Two single-block (or
/// two all-singleton) partitions compare as 1.
double adjusted_rand(const Partition& p, const Partition& q);

struct CurveBand {
  std::size_t subject = 0;
  std::optional<std::size_t> replicate;  // set for the nested model
  std::vector<double> grid, mean, lo, hi;
};

/// Pointwise posterior mean and central 95% band of the fitted curve of one
/// subject, pooling draws of every archive. The mean model yields a single
/// band per subject, the nested model one per replicate.
std::vector<CurveBand> reconstruct_curves(std::span<const ChainArchive> archives, std::size_t subject,
                                          std::span<const double> grid);

/// Sample quantile taken as sorted[floor(q (n - 1))] for q < 0.5 and
/// sorted[ceil(q (n - 1))] otherwise.
double band_quantile(std::vector<double> values, double q);

/// Nadaraya-Watson estimate with a Gaussian kernel.
std::vector<double> kernel_smooth(std::span<const double> x, std::span<const double> y, std::span<const double> grid,
                                  double bandwidth);

/// Silverman's rule of thumb on the covariate values.
double silverman_bandwidth(std::span<const double> x);

struct BaselineResult {
  Partition partition;
  /// Complete-linkage heights in merge order (I - 1 entries).
  std::vector<double> merge_heights;
  std::vector<double> bic;  // bic[c - 1] scores the cut into c clusters
};

/// Kernel smooth every curve on `grid_points` equally spaced points spanning
/// the data, average per subject, cluster with complete linkage and cut where
/// a spherical Gaussian mixture scores the highest BIC.
BaselineResult baseline_cluster(const NestedDataset& data, std::size_t grid_points);

}  // namespace nestfc
