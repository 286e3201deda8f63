#include "nestfc/sampler_mean.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nestfc/errors.hpp"
#include "nestfc/numeric.hpp"

namespace nestfc {

namespace {

Eigen::MatrixXd inverse_wishart_mean(const Eigen::MatrixXd& scale, double df) {
  const double excess = df - static_cast<double>(scale.rows()) - 1.0;
  return excess > 0.0 ? Eigen::MatrixXd(scale / excess) : scale;
}

}  // namespace

void validate_run_settings(const RunSettings& run) {
  if (run.K == 0 || run.L == 0) throw std::invalid_argument("truncation levels must be at least 1");
  if (run.sweeps <= run.burnin) throw std::invalid_argument("sweeps must exceed burnin");
  if (run.thin == 0) throw std::invalid_argument("thin must be at least 1");
}

MeanSampler::MeanSampler(const PreparedData& data, Hyperparams hyper, std::size_t K, SamplerOptions options,
                         std::uint64_t seed)
    : data_(data), hyper_(std::move(hyper)), K_(K), options_(std::move(options)) {
  if (K_ == 0) throw std::invalid_argument("truncation K must be at least 1");
  hyper_.validate(data_.dim);
  const Eigen::Index d = data_.dim;
  auto& s = state_;
  s.rng.seed(seed);
  s.a = options_.fixed_a.value_or(hyper_.a.mean());
  s.b = options_.fixed_b.value_or(hyper_.b.mean());
  s.gamma = hyper_.eta1 / (hyper_.eta1 + hyper_.eta2);
  s.omega = inverse_wishart_mean(hyper_.omega0, hyper_.nu_omega);
  if (options_.fixed_sigma) {
    if (options_.fixed_sigma->rows() != d || !is_spd(*options_.fixed_sigma)) {
      throw std::invalid_argument("fixed Sigma must be SPD of the basis dimension");
    }
    s.sigma = *options_.fixed_sigma;
    options_.update_sigma = false;
  } else {
    s.sigma = inverse_wishart_mean(hyper_.sigma0, hyper_.nu_sigma);
  }

  s.sticks = sample_sticks(s.rng, {s.a, s.b}, K_);
  const BaseMeasure base = base_measure();
  s.atoms.reserve(K_);
  for (std::size_t k = 0; k < K_; ++k) s.atoms.push_back(base.sample(s.rng));
  s.z.resize(data_.num_subjects());
  for (auto& zi : s.z) zi = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, K_ - 1)(s.rng));

  raw_.resize(data_.num_subjects());
  s.theta_ij.resize(data_.num_subjects());
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    for (const auto& c : data_.subjects[i]) {
      raw_[i].push_back(SufficientStats::of_curve(c.design, c.y));
      const auto& st = raw_[i].back();
      s.theta_ij[i].push_back((st.gram + eye).ldlt().solve(st.cross));
    }
  }
  refresh_whitening();
}

BaseMeasure MeanSampler::base_measure() const {
  return BaseMeasure(state_.omega, hyper_.nu1, hyper_.nu2, state_.gamma);
}

void MeanSampler::refresh_whitening() {
  whitened_.assign(data_.num_subjects(), WhitenedSubject{SufficientStats(data_.dim), 0.0});
  if (options_.prior_only) return;
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    auto& w = whitened_[i];
    for (const auto& c : data_.subjects[i]) {
      Eigen::MatrixXd v = c.design * state_.sigma * c.design.transpose();
      v.diagonal().array() += 1.0;
      const auto llt = checked_llt(0.5 * (v + v.transpose()), "replicate marginal covariance");
      const Eigen::MatrixXd design_w = llt.matrixL().solve(c.design);
      const Eigen::VectorXd y_w = llt.matrixL().solve(c.y);
      w.stats += SufficientStats::of_curve(design_w, y_w);
      w.half_log_det += 0.5 * log_det_from_llt(llt);
    }
  }
}

double MeanSampler::subject_loglik(std::size_t i, const ClusterAtom& atom) const {
  if (options_.prior_only) return 0.0;
  const auto& w = whitened_[i];
  return w.stats.loglik(atom.effective(), atom.sigma2) - w.half_log_det;
}

std::vector<double> MeanSampler::subject_alloc_logprobs(std::size_t i) const {
  if (i >= data_.num_subjects()) throw std::out_of_range("subject index out of range");
  std::vector<double> out(K_);
  const auto& lw = state_.sticks.log_weights();
  for (std::size_t k = 0; k < K_; ++k) out[k] = lw[k] + subject_loglik(i, state_.atoms[k]);
  return out;
}

void MeanSampler::update_allocations() {
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    const auto lp = subject_alloc_logprobs(i);
    state_.z[i] = static_cast<int>(random::categorical_log(state_.rng, lp));
  }
}

void MeanSampler::update_sticks() {
  std::vector<std::size_t> counts(K_, 0);
  for (int zi : state_.z) ++counts[static_cast<std::size_t>(zi)];
  state_.sticks = sample_stick_posterior(state_.rng, counts, state_.a, state_.b);
}

void MeanSampler::update_atoms() {
  const BaseMeasure base = base_measure();
  std::vector<SufficientStats> pooled(K_, SufficientStats(data_.dim));
  if (!options_.prior_only) {
    for (std::size_t i = 0; i < data_.num_subjects(); ++i) pooled[static_cast<std::size_t>(state_.z[i])] += whitened_[i].stats;
  }
  for (std::size_t k = 0; k < K_; ++k) {
    state_.atoms[k] = update_atom(state_.rng, pooled[k], base, state_.atoms[k].lambda);
  }
}

void MeanSampler::update_replicate_coefficients() {
  const Eigen::Index d = data_.dim;
  const auto sigma_llt = checked_llt(state_.sigma, "Sigma");
  const Eigen::MatrixXd sigma_inv = sigma_llt.solve(Eigen::MatrixXd::Identity(d, d));
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    const auto& atom = state_.atoms[static_cast<std::size_t>(state_.z[i])];
    const Eigen::VectorXd beta = atom.effective();
    for (std::size_t j = 0; j < raw_[i].size(); ++j) {
      Eigen::MatrixXd precision = sigma_inv;
      Eigen::VectorXd rhs = sigma_inv * beta;
      if (!options_.prior_only) {
        precision += raw_[i][j].gram;
        rhs += raw_[i][j].cross;
      }
      state_.theta_ij[i][j] = random::mvn_precision(state_.rng, precision / atom.sigma2, rhs / atom.sigma2);
    }
  }
}

void MeanSampler::update_covariances() {
  if (options_.update_omega) {
    Eigen::MatrixXd scale = hyper_.omega0;
    for (const auto& atom : state_.atoms) scale.noalias() += atom.theta * atom.theta.transpose() / atom.sigma2;
    state_.omega = random::inverse_wishart(state_.rng, hyper_.nu_omega + static_cast<double>(K_), scale);
  }
  if (options_.update_sigma) {
    Eigen::MatrixXd scale = hyper_.sigma0;
    double replicates = 0.0;
    for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
      const auto& atom = state_.atoms[static_cast<std::size_t>(state_.z[i])];
      const Eigen::VectorXd beta = atom.effective();
      for (const auto& th : state_.theta_ij[i]) {
        const Eigen::VectorXd dev = th - beta;
        scale.noalias() += dev * dev.transpose() / atom.sigma2;
        replicates += 1.0;
      }
    }
    state_.sigma = random::inverse_wishart(state_.rng, hyper_.nu_sigma + replicates, scale);
    refresh_whitening();
  }
}

void MeanSampler::update_gamma() {
  if (!options_.update_gamma) return;
  double on = 0.0, total = 0.0;
  for (const auto& atom : state_.atoms) {
    for (std::size_t s = 1; s < atom.lambda.size(); ++s) {
      on += atom.lambda[s];
      total += 1.0;
    }
  }
  state_.gamma = random::beta(state_.rng, hyper_.eta1 + on, hyper_.eta2 + total - on);
  // keep gamma strictly inside (0, 1) for the Bernoulli log-densities
  state_.gamma = std::clamp(state_.gamma, 1e-300, 1.0 - 1e-16);
}

void MeanSampler::update_concentrations(bool adapt) {
  auto& s = state_;
  if (!options_.fixed_a) {
    s.a = s.walk_a.update(
        s.rng, s.a,
        [&](double a) { return density::log_gamma(a, hyper_.a.shape, hyper_.a.rate) + sticks_log_prior(s.sticks, a, s.b); },
        adapt, options_.target_acceptance);
  }
  if (!options_.fixed_b) {
    s.b = s.walk_b.update(
        s.rng, s.b,
        [&](double b) { return density::log_gamma(b, hyper_.b.shape, hyper_.b.rate) + sticks_log_prior(s.sticks, s.a, b); },
        adapt, options_.target_acceptance);
  }
}

void MeanSampler::sweep(bool adapt) {
  update_allocations();
  update_sticks();
  update_atoms();
  update_replicate_coefficients();
  update_covariances();
  update_gamma();
  update_concentrations(adapt);
  ++state_.iteration;
  if (options_.check_invariants) check_invariants();
}

double MeanSampler::log_posterior() const {
  const auto& s = state_;
  const BaseMeasure base = base_measure();
  double out = 0.0;
  const auto& lw = s.sticks.log_weights();
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    const auto k = static_cast<std::size_t>(s.z[i]);
    out += lw[k] + subject_loglik(i, s.atoms[k]);
  }
  for (const auto& atom : s.atoms) out += base.log_density(atom);
  out += sticks_log_prior(s.sticks, s.a, s.b);
  out += density::log_gamma(s.a, hyper_.a.shape, hyper_.a.rate);
  out += density::log_gamma(s.b, hyper_.b.shape, hyper_.b.rate);
  out += density::log_beta(s.gamma, hyper_.eta1, hyper_.eta2);
  out += density::log_inverse_wishart(s.omega, hyper_.nu_omega, hyper_.omega0);
  if (!options_.fixed_sigma) out += density::log_inverse_wishart(s.sigma, hyper_.nu_sigma, hyper_.sigma0);
  return out;
}

void MeanSampler::check_invariants() const {
  const auto& s = state_;
  for (int zi : s.z) {
    if (zi < 0 || static_cast<std::size_t>(zi) >= K_) throw NumericalError("allocation out of range");
  }
  double total = 0.0;
  for (double w : s.sticks.weights()) {
    if (!(w >= 0.0)) throw NumericalError("negative stick weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw NumericalError("stick weights do not sum to one");
  for (const auto& atom : s.atoms) atom.validate();
  if (!is_spd(s.omega)) throw NumericalError("Omega is not SPD");
  if (!is_spd(s.sigma)) throw NumericalError("Sigma is not SPD");
}

RetainedDraw MeanSampler::snapshot() const {
  const auto& s = state_;
  RetainedDraw d;
  d.iteration = s.iteration;
  d.log_posterior = log_posterior();
  d.a = s.a;
  d.b = s.b;
  d.gamma = s.gamma;
  d.nu2 = hyper_.nu2;
  d.omega_fro = frobenius(s.omega);
  d.sigma_fro = frobenius(s.sigma);
  std::vector<bool> used(K_, false);
  for (int zi : s.z) {
    d.subject_labels.push_back(zi);
    used[static_cast<std::size_t>(zi)] = true;
  }
  for (std::size_t k = 0; k < K_; ++k) {
    if (!used[k]) continue;
    const auto& atom = s.atoms[k];
    d.atoms.push_back({static_cast<std::int32_t>(k), atom.sigma2, atom.lambda,
                       std::vector<double>(atom.theta.data(), atom.theta.data() + atom.theta.size())});
  }
  d.occupied_top = static_cast<std::int32_t>(d.atoms.size());
  return d;
}

void run_chain_mean(const PreparedData& data, const Hyperparams& hyper, const RunSettings& run,
                    const SamplerOptions& options, const DrawSink& sink) {
  validate_run_settings(run);
  MeanSampler sampler(data, hyper, run.K, options, run.seed);
  for (std::size_t it = 0; it < run.sweeps; ++it) {
    sampler.sweep(it < run.burnin);
    if (it >= run.burnin && (it - run.burnin) % run.thin == 0) {
      auto draw = sampler.snapshot();
      if (!std::isfinite(draw.log_posterior)) {
        throw NumericalError("non-finite log posterior at sweep " + std::to_string(it + 1));
      }
      sink(draw);
    }
  }
}

std::vector<RetainedDraw> run_chain_mean(const PreparedData& data, const Hyperparams& hyper, const RunSettings& run,
                                         const SamplerOptions& options) {
  std::vector<RetainedDraw> draws;
  run_chain_mean(data, hyper, run, options, [&](const RetainedDraw& d) { draws.push_back(d); });
  return draws;
}

}  // namespace nestfc
