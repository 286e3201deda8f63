#include "nestfc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nestfc/basis.hpp"

namespace nestfc {

namespace {

std::size_t check_draws(std::span<const std::vector<int>> draws) {
  if (draws.empty()) throw std::invalid_argument("no partition draws");
  const std::size_t n = draws.front().size();
  for (const auto& d : draws) {
    if (d.size() != n) throw std::invalid_argument("partition draws have inconsistent lengths");
  }
  return n;
}

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

Eigen::MatrixXd incidence_matrix(std::span<const std::vector<int>> draws) {
  const std::size_t n = check_draws(draws);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& d : draws) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (d[i] == d[j]) counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 1.0;
      }
    }
  }
  counts /= static_cast<double>(draws.size());
  Eigen::MatrixXd out = counts + counts.transpose().eval();
  out.diagonal().setOnes();
  return out;
}

double binder_loss(std::span<const int> labels, const Eigen::MatrixXd& incidence) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (incidence.rows() != n || incidence.cols() != n) throw std::invalid_argument("incidence size mismatch");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (labels[i] == labels[j] ? 1.0 : 0.0) - incidence(i, j);
      loss += d * d;
    }
  }
  return loss;
}

PointPartition point_partition(std::span<const std::vector<int>> draws, const Eigen::MatrixXd& incidence) {
  check_draws(draws);
  PointPartition best;
  best.loss = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < draws.size(); ++t) {
    const double loss = binder_loss(draws[t], incidence);
    if (loss < best.loss) {
      best.loss = loss;
      best.draw_index = t;
    }
  }
  best.partition = Partition(draws[best.draw_index]);
  return best;
}

std::optional<double> psrf(std::span<const std::vector<double>> chains) {
  if (chains.size() < 2) throw std::invalid_argument("psrf needs at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 2) throw std::invalid_argument("psrf needs at least two draws per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("psrf chains must have equal length");
  }
  const auto m = static_cast<double>(chains.size());
  const auto nd = static_cast<double>(n);
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    const double mu = std::accumulate(c.begin(), c.end(), 0.0) / nd;
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    within += ss / (nd - 1.0);
    means.push_back(mu);
  }
  within /= m;
  if (!(within > 0.0)) return std::nullopt;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= nd / (m - 1.0);
  return std::sqrt((nd - 1.0) / nd + between / (nd * within));
}

double adjusted_rand(const Partition& p, const Partition& q) {
  if (p.size() != q.size()) throw std::invalid_argument("partitions have different sizes");
  const std::size_t n = p.size();
  std::vector<double> table(p.num_clusters() * q.num_clusters(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    table[static_cast<std::size_t>(p.labels()[i]) * q.num_clusters() + static_cast<std::size_t>(q.labels()[i])] += 1.0;
  }
  double index = 0.0;
  for (double v : table) index += choose2(v);
  double sum_p = 0.0, sum_q = 0.0;
  for (auto s : p.block_sizes()) sum_p += choose2(static_cast<double>(s));
  for (auto s : q.block_sizes()) sum_q += choose2(static_cast<double>(s));
  const double pairs = choose2(static_cast<double>(n));
  const double expected = pairs > 0.0 ? sum_p * sum_q / pairs : 0.0;
  const double maximum = 0.5 * (sum_p + sum_q);
  if (maximum - expected == 0.0) return p == q ? 1.0 : 0.0;
  return (index - expected) / (maximum - expected);
}

double band_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto idx = static_cast<std::size_t>(q < 0.5 ? std::floor(pos) : std::ceil(pos));
  return values[std::min(idx, values.size() - 1)];
}

std::vector<CurveBand> reconstruct_curves(std::span<const ChainArchive> archives, std::size_t subject,
                                          std::span<const double> grid) {
  if (archives.empty()) throw std::invalid_argument("no archives to summarize");
  const auto& first = archives.front().manifest;
  if (subject >= first.subject_ids.size()) throw std::out_of_range("subject index out of range");
  const SplineBasis basis(first.knots, first.degree);
  const Eigen::MatrixXd design = basis.design(grid);
  const bool nested = first.model == ModelKind::nested;
  const std::size_t n_rep = nested ? first.replicate_ids.at(subject).size() : 1;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < subject; ++i) offset += first.replicate_ids.at(i).size();

  // values[r][g] holds one fitted value per draw.
  std::vector<std::vector<std::vector<double>>> values(n_rep, std::vector<std::vector<double>>(grid.size()));
  for (const auto& archive : archives) {
    const auto& m = archive.manifest;
    if (m.model != first.model || m.knots != first.knots || m.degree != first.degree ||
        m.subject_ids != first.subject_ids) {
      throw std::invalid_argument("archives describe different fits");
    }
    for (const auto& draw : archive.draws) {
      for (std::size_t r = 0; r < n_rep; ++r) {
        const int k = draw.subject_labels.at(subject);
        const int key = nested ? k * static_cast<int>(m.L) + draw.curve_labels.at(offset + r) : k;
        const AtomRecord* atom = draw.find_atom(key);
        if (atom == nullptr) throw std::invalid_argument("draw lacks the atom of an allocated subject");
        Eigen::VectorXd beta(static_cast<Eigen::Index>(atom->theta.size()));
        for (std::size_t s = 0; s < atom->theta.size(); ++s) {
          beta(static_cast<Eigen::Index>(s)) = atom->lambda[s] ? atom->theta[s] : 0.0;
        }
        const Eigen::VectorXd fit = design * beta;
        for (std::size_t g = 0; g < grid.size(); ++g) values[r][g].push_back(fit(static_cast<Eigen::Index>(g)));
      }
    }
  }
  if (values.front().empty() || values.front().front().empty()) {
    if (grid.empty()) throw std::invalid_argument("empty grid");
    throw std::invalid_argument("archives contain no draws");
  }

  std::vector<CurveBand> out;
  for (std::size_t r = 0; r < n_rep; ++r) {
    CurveBand band;
    band.subject = subject;
    if (nested) band.replicate = r;
    band.grid.assign(grid.begin(), grid.end());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto& v = values[r][g];
      const double mu = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      band.mean.push_back(mu);
      band.lo.push_back(std::min(band_quantile(v, 0.025), mu));
      band.hi.push_back(std::max(band_quantile(v, 0.975), mu));
    }
    out.push_back(std::move(band));
  }
  return out;
}

std::vector<double> kernel_smooth(std::span<const double> x, std::span<const double> y, std::span<const double> grid,
                                  double bandwidth) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("kernel_smooth needs matching nonempty x and y");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  std::vector<double> out;
  out.reserve(grid.size());
  std::vector<double> logw(x.size());
  for (double g : grid) {
    // Weights are normalized in log space so far-away grid points stay finite.
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double u = (x[t] - g) / bandwidth;
      logw[t] = -0.5 * u * u;
      top = std::max(top, logw[t]);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double w = std::exp(logw[t] - top);
      num += w * y[t];
      den += w;
    }
    out.push_back(num / den);
  }
  return out;
}

double silverman_bandwidth(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mu) * (v - mu);
  return 1.06 * std::sqrt(ss / (n - 1.0)) * std::pow(n, -0.2);
}

namespace {

struct Linkage {
  std::vector<std::pair<std::size_t, std::size_t>> merges;  // representative items
  std::vector<double> heights;
};

Linkage complete_linkage(const Eigen::MatrixXd& dist) {
  const auto n = static_cast<std::size_t>(dist.rows());
  Eigen::MatrixXd d = dist;
  std::vector<bool> alive(n, true);
  Linkage out;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (alive[j] && d(i, j) < best) {
          best = d(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    out.merges.emplace_back(bi, bj);
    out.heights.push_back(best);
    alive[bj] = false;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = std::max(d(bi, k), d(bj, k));
      d(bi, k) = v;
      d(k, bi) = v;
    }
  }
  return out;
}

std::vector<int> cut_tree(const Linkage& tree, std::size_t n, std::size_t clusters) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (std::size_t m = 0; m < n - clusters; ++m) parent[find(tree.merges[m].second)] = find(tree.merges[m].first);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(find(i));
  return labels;
}

}  // namespace

BaselineResult baseline_cluster(const NestedDataset& data, std::size_t grid_points) {
  data.validate();
  const std::size_t n = data.num_subjects();
  if (n < 2) throw std::invalid_argument("baseline clustering needs at least two subjects");
  if (grid_points < 2) throw std::invalid_argument("baseline grid needs at least two points");
  const auto [lo, hi] = data.x_range();
  const std::vector<double> grid = make_knots(lo, hi, grid_points);
  const double step = grid.size() > 1 ? grid[1] - grid[0] : 1.0;
  const auto D = static_cast<Eigen::Index>(grid.size());

  // Subject means on the grid, plus a noise floor for the cluster variances:
  // the residual variance of the smooths divided by the replicate count
  // approximates the sampling variance of one subject's averaged profile.
  Eigen::MatrixXd profiles(static_cast<Eigen::Index>(n), D);
  double resid_ss = 0.0, resid_n = 0.0, reps = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(D);
    for (const auto& rep : data.subjects[i].replicates) {
      const double h = std::max(silverman_bandwidth(rep.x), step);
      const auto fit = kernel_smooth(rep.x, rep.y, grid, h);
      acc += Eigen::Map<const Eigen::VectorXd>(fit.data(), D);
      const auto at_x = kernel_smooth(rep.x, rep.y, rep.x, h);
      for (std::size_t t = 0; t < rep.y.size(); ++t) resid_ss += (rep.y[t] - at_x[t]) * (rep.y[t] - at_x[t]);
      resid_n += static_cast<double>(rep.y.size());
    }
    const auto r = static_cast<double>(data.subjects[i].replicates.size());
    reps += r;
    profiles.row(static_cast<Eigen::Index>(i)) = (acc / r).transpose();
  }
  const Eigen::RowVectorXd centre = profiles.colwise().mean();
  const double spread = (profiles.rowwise() - centre).squaredNorm() / static_cast<double>(n * D);
  const double floor =
      std::max(resid_ss / resid_n / (reps / static_cast<double>(n)), 1e-12 * (1.0 + spread));

  Eigen::MatrixXd dist(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    for (Eigen::Index j = 0; j < dist.cols(); ++j) dist(i, j) = (profiles.row(i) - profiles.row(j)).norm();
  }
  const Linkage tree = complete_linkage(dist);

  BaselineResult out;
  out.merge_heights = tree.heights;
  if (dist.maxCoeff() == 0.0) {
    out.partition = Partition(std::vector<int>(n, 0));
    out.bic.assign(n, 0.0);
    return out;
  }
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  const auto dd = static_cast<double>(D);
  const auto nn = static_cast<double>(n);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 1; c <= n; ++c) {
    const Partition part(cut_tree(tree, n, c));
    double loglik = 0.0;
    for (std::size_t k = 0; k < part.num_clusters(); ++k) {
      Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(D);
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(part.labels()[i]) == k) mu += profiles.row(static_cast<Eigen::Index>(i));
      }
      const auto size = static_cast<double>(part.block_sizes()[k]);
      mu /= size;
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(part.labels()[i]) == k) {
          ss += (profiles.row(static_cast<Eigen::Index>(i)) - mu).squaredNorm();
        }
      }
      const double var = std::max(ss / (size * dd), floor);
      loglik += size * std::log(size / nn) - 0.5 * size * dd * (kLog2Pi + std::log(var)) - 0.5 * ss / var;
    }
    const double params = static_cast<double>(c) * (dd + 1.0) + static_cast<double>(c) - 1.0;
    const double bic = 2.0 * loglik - params * std::log(nn);
    out.bic.push_back(bic);
    if (bic > best) {
      best = bic;
      out.partition = part;
    }
  }
  return out;
}

}  // namespace nestfc
