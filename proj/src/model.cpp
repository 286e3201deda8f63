#include "nestfc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nestfc/errors.hpp"
#include "nestfc/numeric.hpp"

namespace nestfc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::string pad_id(char prefix, std::size_t index, std::size_t total) {
  std::string digits = std::to_string(index + 1);
  const std::size_t width = std::to_string(total).size();
  return std::string(1, prefix) + std::string(width - std::min(width, digits.size()), '0') + digits;
}
}  // namespace

void NestedDataset::validate() const {
  if (subjects.empty()) throw DataError("dataset has no subjects");
  for (const auto& s : subjects) {
    if (s.replicates.empty()) throw DataError("subject '" + s.id + "' has no replicates");
    for (const auto& r : s.replicates) {
      if (r.x.empty()) throw DataError("replicate '" + r.id + "' of subject '" + s.id + "' is empty");
      if (r.x.size() != r.y.size()) throw DataError("replicate '" + r.id + "' has mismatched x/y lengths");
      for (std::size_t t = 0; t < r.x.size(); ++t) {
        if (!std::isfinite(r.x[t]) || !std::isfinite(r.y[t])) {
          throw DataError("replicate '" + r.id + "' of subject '" + s.id + "' has non-finite values");
        }
      }
    }
  }
}

std::size_t NestedDataset::num_curves() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.replicates.size();
  return n;
}

std::size_t NestedDataset::num_observations() const {
  std::size_t n = 0;
  for (const auto& s : subjects)
    for (const auto& r : s.replicates) n += r.x.size();
  return n;
}

std::pair<double, double> NestedDataset::x_range() const {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : subjects)
    for (const auto& r : s.replicates)
      for (double x : r.x) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
  return {lo, hi};
}

Eigen::VectorXd ClusterAtom::effective() const {
  Eigen::VectorXd out = theta;
  for (Eigen::Index s = 0; s < out.size(); ++s) {
    if (!lambda[static_cast<std::size_t>(s)]) out(s) = 0.0;
  }
  return out;
}

void ClusterAtom::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw NumericalError("atom variance must be positive");
  if (static_cast<Eigen::Index>(lambda.size()) != theta.size()) throw std::invalid_argument("atom lambda/theta size mismatch");
  if (lambda.empty() || lambda[0] != 1) throw std::invalid_argument("atom intercept must be included");
  if (!theta.allFinite()) throw NumericalError("atom coefficients must be finite");
}

Hyperparams Hyperparams::defaults(std::span<const Eigen::MatrixXd> designs) {
  if (designs.empty()) throw std::invalid_argument("unit-information defaults need at least one design matrix");
  Hyperparams h;
  h.omega0 = unit_information_scale(designs);
  h.sigma0 = h.omega0;
  const auto p = static_cast<double>(designs.front().cols() - 1);
  h.nu_omega = p + 3.0;
  h.nu_sigma = p + 3.0;
  return h;
}

void Hyperparams::validate(Eigen::Index dim) const {
  for (double v : {nu1, nu2, eta1, eta2, rho, psi}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("hyperparameters must be finite and positive");
  }
  for (const auto& g : {a, b, a1, b1, a2, b2}) {
    if (!(g.shape > 0.0) || !(g.rate > 0.0)) throw std::invalid_argument("Gamma hyperpriors must be positive");
  }
  const double min_df = static_cast<double>(dim) - 1.0;
  if (!(nu_omega > min_df) || !(nu_sigma > min_df)) {
    throw std::invalid_argument("inverse-Wishart degrees of freedom must exceed dim - 1");
  }
  if (omega0.rows() != dim || sigma0.rows() != dim || !is_spd(omega0) || !is_spd(sigma0)) {
    throw std::invalid_argument("inverse-Wishart scales must be SPD of the basis dimension");
  }
}

PreparedData PreparedData::build(const NestedDataset& data, const SplineBasis& basis) {
  data.validate();
  PreparedData out;
  out.dim = basis.num_columns();
  out.subjects.reserve(data.subjects.size());
  for (const auto& s : data.subjects) {
    std::vector<CurveData> curves;
    curves.reserve(s.replicates.size());
    for (const auto& r : s.replicates) {
      curves.push_back({basis.design(r.x), Eigen::Map<const Eigen::VectorXd>(r.y.data(), static_cast<Eigen::Index>(r.y.size()))});
    }
    out.subjects.push_back(std::move(curves));
  }
  return out;
}

std::size_t PreparedData::num_curves() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.size();
  return n;
}

std::vector<Eigen::MatrixXd> PreparedData::designs() const {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& s : subjects)
    for (const auto& c : s) out.push_back(c.design);
  return out;
}

double loglik_curve(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const ClusterAtom& atom) {
  if (!(atom.sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (design.rows() != y.size() || design.cols() != atom.dim()) throw std::invalid_argument("dimension mismatch");
  const Eigen::VectorXd resid = y - design * atom.effective();
  const auto T = static_cast<double>(y.size());
  return -0.5 * T * (kLog2Pi + std::log(atom.sigma2)) - 0.5 * resid.squaredNorm() / atom.sigma2;
}

double marginal_loglik_subject(std::span<const CurveData> curves, const ClusterAtom& atom,
                               const Eigen::MatrixXd& sigma) {
  if (!(atom.sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  const Eigen::VectorXd mean_coef = atom.effective();
  double total = 0.0;
  for (const auto& c : curves) {
    const Eigen::Index T = c.y.size();
    Eigen::MatrixXd cov = c.design * sigma * c.design.transpose();
    cov.diagonal().array() += 1.0;
    cov *= atom.sigma2;
    const auto llt = checked_llt(0.5 * (cov + cov.transpose()), "replicate marginal covariance");
    const Eigen::VectorXd resid = c.y - c.design * mean_coef;
    const Eigen::VectorXd white = llt.matrixL().solve(resid);
    total += -0.5 * (static_cast<double>(T) * kLog2Pi + log_det_from_llt(llt) + white.squaredNorm());
  }
  return total;
}

Eigen::MatrixXd unit_information_scale(std::span<const Eigen::MatrixXd> designs) {
  if (designs.empty()) throw std::invalid_argument("no design matrices");
  const Eigen::Index d = designs.front().cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  double rows = 0.0;
  for (const auto& b : designs) {
    if (b.cols() != d) throw std::invalid_argument("design matrices disagree on column count");
    gram.noalias() += b.transpose() * b;
    rows += static_cast<double>(b.rows());
  }
  return jitter_spd(gram / rows);
}

void GeneratorSpec::validate() const {
  if (grid.empty() || shapes.empty() || group_mixtures.empty() || subjects_per_group.empty() ||
      replicates_per_subject == 0) {
    throw std::invalid_argument("generator spec is empty");
  }
  if (group_mixtures.size() != subjects_per_group.size()) {
    throw std::invalid_argument("one subject count per group is required");
  }
  for (const auto& s : shapes) {
    if (s.size() != grid.size()) throw std::invalid_argument("shapes must be given on the grid");
  }
  for (const auto& m : group_mixtures) {
    if (m.size() != shapes.size()) throw std::invalid_argument("group mixture must weight every shape");
    double total = 0.0;
    for (double w : m) {
      if (!(w >= 0.0)) throw std::invalid_argument("mixture weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("mixture weights must not all be zero");
  }
  if (!(noise_sd >= 0.0) || !(replicate_sd >= 0.0)) throw std::invalid_argument("noise levels must be non-negative");
}

SimulatedData simulate_dataset(Rng& rng, const GeneratorSpec& spec) {
  spec.validate();
  SimulatedData out;
  std::size_t total = 0;
  for (auto n : spec.subjects_per_group) total += n;
  std::size_t index = 0;
  for (std::size_t g = 0; g < spec.group_mixtures.size(); ++g) {
    for (std::size_t s = 0; s < spec.subjects_per_group[g]; ++s, ++index) {
      Subject subject{pad_id('s', index, total), {}};
      std::vector<int> shape_labels;
      for (std::size_t j = 0; j < spec.replicates_per_subject; ++j) {
        const std::size_t shape = random::categorical(rng, spec.group_mixtures[g]);
        const double offset = spec.replicate_sd * random::normal(rng);
        Replicate rep{pad_id('r', j, spec.replicates_per_subject), spec.grid, {}};
        rep.y.reserve(spec.grid.size());
        for (std::size_t t = 0; t < spec.grid.size(); ++t) {
          rep.y.push_back(spec.shapes[shape][t] + offset + spec.noise_sd * random::normal(rng));
        }
        subject.replicates.push_back(std::move(rep));
        shape_labels.push_back(static_cast<int>(shape));
      }
      out.data.subjects.push_back(std::move(subject));
      out.subject_labels.push_back(static_cast<int>(g));
      out.curve_labels.push_back(std::move(shape_labels));
    }
  }
  return out;
}

double min_shape_separation(const GeneratorSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.shapes.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.shapes.size(); ++j) {
      double ss = 0.0;
      for (std::size_t t = 0; t < spec.grid.size(); ++t) {
        const double d = spec.shapes[i][t] - spec.shapes[j][t];
        ss += d * d;
      }
      best = std::min(best, std::sqrt(ss / static_cast<double>(spec.grid.size())));
    }
  }
  return best;
}

namespace scenarios {

std::vector<double> day_grid() {
  std::vector<double> grid;
  for (int d = -10; d <= 2; ++d) grid.push_back(d);
  return grid;
}

GeneratorSpec separated_means(std::size_t subjects_per_group, std::size_t replicates) {
  GeneratorSpec spec;
  spec.grid = day_grid();
  std::vector<double> flat, ramp, hinge;
  for (double x : spec.grid) {
    flat.push_back(0.0);
    ramp.push_back(0.25 * (x + 10.0));
    hinge.push_back(2.0 - 0.5 * std::max(x + 4.0, 0.0));
  }
  spec.shapes = {flat, ramp, hinge};
  spec.group_mixtures = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  spec.subjects_per_group = {subjects_per_group, subjects_per_group, subjects_per_group};
  spec.replicates_per_subject = replicates;
  spec.noise_sd = 0.2 * min_shape_separation(spec);
  return spec;
}

GeneratorSpec confounded_mixtures(std::size_t subjects_per_group, std::size_t replicates, double noise_sd) {
  GeneratorSpec spec;
  spec.grid = day_grid();
  std::vector<double> low, mid, high;
  for (double x : spec.grid) {
    const double centre = 0.2 * (x + 10.0);
    const double spread = 0.4 * std::max(x + 6.0, 0.0);
    low.push_back(centre - spread);
    mid.push_back(centre);
    high.push_back(centre + spread);
  }
  spec.shapes = {low, mid, high};
  spec.group_mixtures = {{0, 1, 0}, {0.5, 0, 0.5}};
  spec.subjects_per_group = {subjects_per_group, subjects_per_group};
  spec.replicates_per_subject = replicates;
  spec.noise_sd = noise_sd;
  return spec;
}

}  // namespace scenarios
}  // namespace nestfc
