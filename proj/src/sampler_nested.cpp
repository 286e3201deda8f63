#include "nestfc/sampler_nested.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nestfc/errors.hpp"
#include "nestfc/numeric.hpp"

namespace nestfc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::MatrixXd inverse_wishart_mean(const Eigen::MatrixXd& scale, double df) {
  const double excess = df - static_cast<double>(scale.rows()) - 1.0;
  return excess > 0.0 ? Eigen::MatrixXd(scale / excess) : scale;
}

void check_weights(const StickWeights& sticks, const char* what) {
  double total = 0.0;
  for (double w : sticks.weights()) {
    if (!(w >= 0.0)) throw NumericalError(std::string("negative weight in ") + what);
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw NumericalError(std::string(what) + " weights do not sum to one");
}
}  // namespace

NestedSampler::NestedSampler(const PreparedData& data, Hyperparams hyper, std::size_t K, std::size_t L,
                             SamplerOptions options, std::uint64_t seed)
    : data_(data), hyper_(std::move(hyper)), K_(K), L_(L), options_(std::move(options)) {
  if (K_ == 0 || L_ == 0) throw std::invalid_argument("truncation levels must be at least 1");
  hyper_.validate(data_.dim);
  auto& s = state_;
  s.rng.seed(seed);
  s.a1 = options_.fixed_a.value_or(hyper_.a1.mean());
  s.b1 = options_.fixed_b.value_or(hyper_.b1.mean());
  s.a2 = options_.fixed_a2.value_or(hyper_.a2.mean());
  s.b2 = options_.fixed_b2.value_or(hyper_.b2.mean());
  s.gamma = hyper_.eta1 / (hyper_.eta1 + hyper_.eta2);
  s.nu2 = options_.update_nu2 ? hyper_.rho / hyper_.psi : hyper_.nu2;
  s.omega = inverse_wishart_mean(hyper_.omega0, hyper_.nu_omega);

  s.top = sample_sticks(s.rng, {s.a1, s.b1}, K_);
  for (std::size_t k = 0; k < K_; ++k) s.bottom.push_back(sample_sticks(s.rng, {s.a2, s.b2}, L_));
  const BaseMeasure base = base_measure();
  s.atoms.reserve(K_ * L_);
  for (std::size_t a = 0; a < K_ * L_; ++a) s.atoms.push_back(base.sample(s.rng));

  std::uniform_int_distribution<std::size_t> top_pick(0, K_ - 1), bottom_pick(0, L_ - 1);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    s.z.push_back(static_cast<int>(top_pick(s.rng)));
    std::vector<int> ci;
    std::vector<SufficientStats> stats;
    for (const auto& c : data_.subjects[i]) {
      ci.push_back(static_cast<int>(bottom_pick(s.rng)));
      stats.push_back(SufficientStats::of_curve(c.design, c.y));
    }
    s.c.push_back(std::move(ci));
    curves_.push_back(std::move(stats));
    curve_offset_.push_back(offset);
    offset += data_.subjects[i].size();
  }
}

BaseMeasure NestedSampler::base_measure() const {
  return BaseMeasure(state_.omega, hyper_.nu1, state_.nu2, state_.gamma);
}

double NestedSampler::curve_loglik(std::size_t i, std::size_t j, const ClusterAtom& atom) const {
  if (options_.prior_only) return 0.0;
  return loglik_curve(data_.subjects[i][j].y, data_.subjects[i][j].design, atom);
}

void NestedSampler::tabulate_logliks() {
  const std::size_t n_atoms = K_ * L_;
  const std::size_t n_curves = data_.num_curves();
  loglik_table_.assign(n_curves * n_atoms, 0.0);
  if (options_.prior_only) return;
  Eigen::MatrixXd betas(data_.dim, static_cast<Eigen::Index>(n_atoms));
  Eigen::VectorXd log_norm(static_cast<Eigen::Index>(n_atoms));
  Eigen::VectorXd inv_var(static_cast<Eigen::Index>(n_atoms));
  for (std::size_t a = 0; a < n_atoms; ++a) {
    betas.col(static_cast<Eigen::Index>(a)) = state_.atoms[a].effective();
    log_norm(static_cast<Eigen::Index>(a)) = kLog2Pi + std::log(state_.atoms[a].sigma2);
    inv_var(static_cast<Eigen::Index>(a)) = 1.0 / state_.atoms[a].sigma2;
  }
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    for (std::size_t j = 0; j < data_.subjects[i].size(); ++j) {
      const auto& c = data_.subjects[i][j];
      Eigen::MatrixXd resid = c.design * betas;
      resid.colwise() -= c.y;
      const Eigen::VectorXd rss = resid.colwise().squaredNorm().transpose();
      const double T = static_cast<double>(c.y.size());
      double* row = loglik_table_.data() + (curve_offset_[i] + j) * n_atoms;
      for (std::size_t a = 0; a < n_atoms; ++a) {
        const auto idx = static_cast<Eigen::Index>(a);
        row[a] = -0.5 * (T * log_norm(idx) + rss(idx) * inv_var(idx));
      }
    }
  }
}

namespace {

/// log pi_k + sum_j logsumexp_l(log varpi_lk + ll(j, k, l)) for every k.
template <typename LogLik>
std::vector<double> subject_logprobs(const NestedChainState& s, std::size_t K, std::size_t L, std::size_t n_curves,
                                     LogLik&& ll) {
  std::vector<double> out(K);
  std::vector<double> inner(L);
  for (std::size_t k = 0; k < K; ++k) {
    double total = s.top.log_weights()[k];
    const auto& lw = s.bottom[k].log_weights();
    for (std::size_t j = 0; j < n_curves; ++j) {
      for (std::size_t l = 0; l < L; ++l) inner[l] = lw[l] + ll(j, k, l);
      total += log_sum_exp(inner);
    }
    out[k] = total;
  }
  return out;
}

}  // namespace

std::vector<double> NestedSampler::subject_alloc_logprobs(std::size_t i) const {
  if (i >= data_.num_subjects()) throw std::out_of_range("subject index out of range");
  return subject_logprobs(state_, K_, L_, data_.subjects[i].size(), [&](std::size_t j, std::size_t k, std::size_t l) {
    return curve_loglik(i, j, state_.atoms[atom_index(k, l)]);
  });
}

std::vector<double> NestedSampler::curve_alloc_logprobs(std::size_t i, std::size_t j) const {
  if (i >= data_.num_subjects() || j >= data_.subjects[i].size()) throw std::out_of_range("curve index out of range");
  const auto k = static_cast<std::size_t>(state_.z[i]);
  std::vector<double> out(L_);
  const auto& lw = state_.bottom[k].log_weights();
  for (std::size_t l = 0; l < L_; ++l) out[l] = lw[l] + curve_loglik(i, j, state_.atoms[atom_index(k, l)]);
  return out;
}

void NestedSampler::update_allocations() {
  tabulate_logliks();
  const std::size_t n_atoms = K_ * L_;
  auto& s = state_;
  std::vector<double> lp(L_);
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    const double* base = loglik_table_.data() + curve_offset_[i] * n_atoms;
    const auto top = subject_logprobs(s, K_, L_, data_.subjects[i].size(),
                                      [&](std::size_t j, std::size_t k, std::size_t l) {
                                        return base[j * n_atoms + atom_index(k, l)];
                                      });
    const auto k = random::categorical_log(s.rng, top);
    s.z[i] = static_cast<int>(k);
    const auto& lw = s.bottom[k].log_weights();
    for (std::size_t j = 0; j < data_.subjects[i].size(); ++j) {
      for (std::size_t l = 0; l < L_; ++l) lp[l] = lw[l] + base[j * n_atoms + atom_index(k, l)];
      s.c[i][j] = static_cast<int>(random::categorical_log(s.rng, lp));
    }
  }
}

void NestedSampler::update_sticks() {
  auto& s = state_;
  std::vector<std::size_t> top_counts(K_, 0);
  std::vector<std::vector<std::size_t>> bottom_counts(K_, std::vector<std::size_t>(L_, 0));
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    const auto k = static_cast<std::size_t>(s.z[i]);
    ++top_counts[k];
    for (int l : s.c[i]) ++bottom_counts[k][static_cast<std::size_t>(l)];
  }
  s.top = sample_stick_posterior(s.rng, top_counts, s.a1, s.b1);
  for (std::size_t k = 0; k < K_; ++k) s.bottom[k] = sample_stick_posterior(s.rng, bottom_counts[k], s.a2, s.b2);
}

void NestedSampler::update_atoms() {
  auto& s = state_;
  const BaseMeasure base = base_measure();
  std::vector<SufficientStats> pooled(K_ * L_, SufficientStats(data_.dim));
  if (!options_.prior_only) {
    for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
      const auto k = static_cast<std::size_t>(s.z[i]);
      for (std::size_t j = 0; j < curves_[i].size(); ++j) {
        pooled[atom_index(k, static_cast<std::size_t>(s.c[i][j]))] += curves_[i][j];
      }
    }
  }
  for (std::size_t a = 0; a < K_ * L_; ++a) s.atoms[a] = update_atom(s.rng, pooled[a], base, s.atoms[a].lambda);
}

void NestedSampler::update_globals() {
  auto& s = state_;
  const auto n_atoms = static_cast<double>(K_ * L_);
  if (options_.update_omega) {
    Eigen::MatrixXd scale = hyper_.omega0;
    for (const auto& atom : s.atoms) scale.noalias() += atom.theta * atom.theta.transpose() / atom.sigma2;
    s.omega = random::inverse_wishart(s.rng, hyper_.nu_omega + n_atoms, scale);
  }
  if (options_.update_gamma) {
    double on = 0.0, total = 0.0;
    for (const auto& atom : s.atoms) {
      for (std::size_t j = 1; j < atom.lambda.size(); ++j) {
        on += atom.lambda[j];
        total += 1.0;
      }
    }
    s.gamma = std::clamp(random::beta(s.rng, hyper_.eta1 + on, hyper_.eta2 + total - on), 1e-300, 1.0 - 1e-16);
  }
  if (options_.update_nu2) {
    double inv_sum = 0.0;
    for (const auto& atom : s.atoms) inv_sum += 1.0 / atom.sigma2;
    s.nu2 = random::gamma(s.rng, hyper_.rho + n_atoms * hyper_.nu1, hyper_.psi + inv_sum);
  }
}

void NestedSampler::update_concentrations(bool adapt) {
  auto& s = state_;
  const double target = options_.target_acceptance;
  auto bottom_prior = [&](double a, double b) {
    double out = 0.0;
    for (const auto& sticks : s.bottom) out += sticks_log_prior(sticks, a, b);
    return out;
  };
  if (!options_.fixed_a) {
    s.a1 = s.walk_a1.update(
        s.rng, s.a1,
        [&](double v) { return density::log_gamma(v, hyper_.a1.shape, hyper_.a1.rate) + sticks_log_prior(s.top, v, s.b1); },
        adapt, target);
  }
  if (!options_.fixed_b) {
    s.b1 = s.walk_b1.update(
        s.rng, s.b1,
        [&](double v) { return density::log_gamma(v, hyper_.b1.shape, hyper_.b1.rate) + sticks_log_prior(s.top, s.a1, v); },
        adapt, target);
  }
  if (!options_.fixed_a2) {
    s.a2 = s.walk_a2.update(
        s.rng, s.a2,
        [&](double v) { return density::log_gamma(v, hyper_.a2.shape, hyper_.a2.rate) + bottom_prior(v, s.b2); }, adapt,
        target);
  }
  if (!options_.fixed_b2) {
    s.b2 = s.walk_b2.update(
        s.rng, s.b2,
        [&](double v) { return density::log_gamma(v, hyper_.b2.shape, hyper_.b2.rate) + bottom_prior(s.a2, v); }, adapt,
        target);
  }
}

void NestedSampler::sweep(bool adapt) {
  update_allocations();
  update_sticks();
  update_atoms();
  update_globals();
  update_concentrations(adapt);
  ++state_.iteration;
  if (options_.check_invariants) check_invariants();
}

double NestedSampler::log_posterior() const {
  const auto& s = state_;
  const BaseMeasure base = base_measure();
  double out = 0.0;
  for (std::size_t i = 0; i < data_.num_subjects(); ++i) {
    const auto k = static_cast<std::size_t>(s.z[i]);
    out += s.top.log_weights()[k];
    for (std::size_t j = 0; j < s.c[i].size(); ++j) {
      const auto l = static_cast<std::size_t>(s.c[i][j]);
      out += s.bottom[k].log_weights()[l] + curve_loglik(i, j, s.atoms[atom_index(k, l)]);
    }
  }
  for (const auto& atom : s.atoms) out += base.log_density(atom);
  out += sticks_log_prior(s.top, s.a1, s.b1);
  for (const auto& sticks : s.bottom) out += sticks_log_prior(sticks, s.a2, s.b2);
  out += density::log_gamma(s.a1, hyper_.a1.shape, hyper_.a1.rate);
  out += density::log_gamma(s.b1, hyper_.b1.shape, hyper_.b1.rate);
  out += density::log_gamma(s.a2, hyper_.a2.shape, hyper_.a2.rate);
  out += density::log_gamma(s.b2, hyper_.b2.shape, hyper_.b2.rate);
  out += density::log_beta(s.gamma, hyper_.eta1, hyper_.eta2);
  out += density::log_inverse_wishart(s.omega, hyper_.nu_omega, hyper_.omega0);
  if (options_.update_nu2) out += density::log_gamma(s.nu2, hyper_.rho, hyper_.psi);
  return out;
}

void NestedSampler::check_invariants() const {
  const auto& s = state_;
  for (std::size_t i = 0; i < s.z.size(); ++i) {
    if (s.z[i] < 0 || static_cast<std::size_t>(s.z[i]) >= K_) throw NumericalError("top allocation out of range");
    for (int l : s.c[i]) {
      if (l < 0 || static_cast<std::size_t>(l) >= L_) throw NumericalError("curve allocation out of range");
    }
  }
  check_weights(s.top, "top stick");
  for (const auto& b : s.bottom) check_weights(b, "bottom stick");
  for (const auto& atom : s.atoms) atom.validate();
  if (!is_spd(s.omega)) throw NumericalError("Omega is not SPD");
}

RetainedDraw NestedSampler::snapshot() const {
  const auto& s = state_;
  RetainedDraw d;
  d.iteration = s.iteration;
  d.log_posterior = log_posterior();
  d.a = s.a1;
  d.b = s.b1;
  d.a2 = s.a2;
  d.b2 = s.b2;
  d.gamma = s.gamma;
  d.nu2 = s.nu2;
  d.omega_fro = frobenius(s.omega);
  std::vector<bool> top_used(K_, false), atom_used(K_ * L_, false);
  for (std::size_t i = 0; i < s.z.size(); ++i) {
    const auto k = static_cast<std::size_t>(s.z[i]);
    d.subject_labels.push_back(s.z[i]);
    top_used[k] = true;
    for (int l : s.c[i]) {
      d.curve_labels.push_back(l);
      atom_used[atom_index(k, static_cast<std::size_t>(l))] = true;
    }
  }
  for (std::size_t a = 0; a < K_ * L_; ++a) {
    if (!atom_used[a]) continue;
    const auto& atom = s.atoms[a];
    d.atoms.push_back({static_cast<std::int32_t>(a), atom.sigma2, atom.lambda,
                       std::vector<double>(atom.theta.data(), atom.theta.data() + atom.theta.size())});
  }
  d.occupied_top = static_cast<std::int32_t>(std::count(top_used.begin(), top_used.end(), true));
  d.occupied_bottom = static_cast<std::int32_t>(d.atoms.size());
  return d;
}

void run_chain_nested(const PreparedData& data, const Hyperparams& hyper, const RunSettings& run,
                      const SamplerOptions& options, const DrawSink& sink) {
  validate_run_settings(run);
  NestedSampler sampler(data, hyper, run.K, run.L, options, run.seed);
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

std::vector<RetainedDraw> run_chain_nested(const PreparedData& data, const Hyperparams& hyper, const RunSettings& run,
                                           const SamplerOptions& options) {
  std::vector<RetainedDraw> draws;
  run_chain_nested(data, hyper, run, options, [&](const RetainedDraw& d) { draws.push_back(d); });
  return draws;
}

}  // namespace nestfc
