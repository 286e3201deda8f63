#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nestfc/basis.hpp"
#include "nestfc/rng.hpp"

namespace nestfc {

struct Replicate {
  std::string id;
  std::vector<double> x;
  std::vector<double> y;
};

struct Subject {
  std::string id;
  std::vector<Replicate> replicates;
};

/// Subjects -> replicate curves -> (x, y) pairs. Sizes may be ragged.
struct NestedDataset {
  std::vector<Subject> subjects;

  /// Throws DataError on empty subjects/replicates, length mismatches or
  /// non-finite values.
  void validate() const;

  std::size_t num_subjects() const { return subjects.size(); }
  std::size_t num_curves() const;
  std::size_t num_observations() const;
  /// Smallest and largest covariate value.
  std::pair<double, double> x_range() const;
};

/// One mixture atom (theta, sigma^2, lambda). lambda[0] is the intercept and
/// is always 1.
struct ClusterAtom {
  Eigen::VectorXd theta;
  double sigma2 = 1.0;
  std::vector<std::uint8_t> lambda;

  Eigen::Index dim() const { return theta.size(); }
  /// Lambda * theta.
  Eigen::VectorXd effective() const;
  void validate() const;
};

struct GammaPrior {
  double shape = 3.0;
  double rate = 3.0;
  double mean() const { return shape / rate; }
};

/// Fixed hyperparameters shared by the mean and nested models. The
/// inverse-Wishart scales use the convention E(X) = scale / (df - d - 1).
struct Hyperparams {
  double nu1 = 2.0;   // inverse-Gamma shape of sigma^2
  double nu2 = 0.04;  // inverse-Gamma scale of sigma^2 (mean model; the nested model samples it)
  double eta1 = 2.0;  // Beta prior on gamma
  double eta2 = 4.0;
  double nu_omega = 0.0;
  double nu_sigma = 0.0;
  Eigen::MatrixXd omega0;
  Eigen::MatrixXd sigma0;
  GammaPrior a, b;           // mean model concentrations
  GammaPrior a1, b1, a2, b2; // nested model concentrations
  double rho = 2.0;          // Gamma(rho, psi) on nu2, shape/rate
  double psi = 50.0;

  /// Unit-information defaults: omega0 = sigma0 = mean Gram matrix of the
  /// design, nu_omega = nu_sigma = p + 3.
  static Hyperparams defaults(std::span<const Eigen::MatrixXd> designs);

  void validate(Eigen::Index dim) const;
};

/// Design matrix and response of one curve.
struct CurveData {
  Eigen::MatrixXd design;
  Eigen::VectorXd y;
};

/// Dataset with design matrices evaluated once.
struct PreparedData {
  std::vector<std::vector<CurveData>> subjects;
  Eigen::Index dim = 0;

  static PreparedData build(const NestedDataset& data, const SplineBasis& basis);
  std::size_t num_subjects() const { return subjects.size(); }
  std::size_t num_curves() const;
  std::vector<Eigen::MatrixXd> designs() const;
};

/// log N(y | X Lambda theta, sigma^2 I).
double loglik_curve(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const ClusterAtom& atom);

/// Sum over a subject's replicates of log N(y_j | X_j Lambda theta,
/// sigma^2 (I + X_j Sigma X_j^T)): the replicate coefficients integrated out.
double marginal_loglik_subject(std::span<const CurveData> curves, const ClusterAtom& atom,
                               const Eigen::MatrixXd& sigma);

/// Sum of X^T X over all curves divided by the total number of rows, with
/// SPD jitter.
Eigen::MatrixXd unit_information_scale(std::span<const Eigen::MatrixXd> designs);

/// Synthetic nested data. Each subject group carries a distribution over
/// curve shapes; every replicate picks a shape from its group's weights and
/// adds a random vertical offset and Gaussian noise.
struct GeneratorSpec {
  std::vector<double> grid;
  std::vector<std::vector<double>> shapes;          // values on the grid
  std::vector<std::vector<double>> group_mixtures;  // group -> weights over shapes
  std::vector<std::size_t> subjects_per_group;
  std::size_t replicates_per_subject = 1;
  double noise_sd = 0.0;
  double replicate_sd = 0.0;

  void validate() const;
};

struct SimulatedData {
  NestedDataset data;
  std::vector<int> subject_labels;               // generating group
  std::vector<std::vector<int>> curve_labels;    // generating shape per replicate
};

SimulatedData simulate_dataset(Rng& rng, const GeneratorSpec& spec);

/// Root-mean-square distance between the closest pair of shapes.
double min_shape_separation(const GeneratorSpec& spec);

namespace scenarios {

/// Day grid -10..2.
std::vector<double> day_grid();

/// Three well-separated mean curves, one per subject group; noise sd is 0.2
/// times the minimum shape separation.
GeneratorSpec separated_means(std::size_t subjects_per_group, std::size_t replicates);

/// Mean-confounded design: group A draws every curve from S1, group B draws
/// half its curves from S0 and half from S2 with (S0 + S2) / 2 = S1.
GeneratorSpec confounded_mixtures(std::size_t subjects_per_group, std::size_t replicates, double noise_sd);

}  // namespace scenarios
}  // namespace nestfc
