#include "nestfc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "nestfc/analysis.hpp"
#include "nestfc/errors.hpp"
#include "nestfc/sampler_mean.hpp"
#include "nestfc/sampler_nested.hpp"

namespace nestfc {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<fs::path> fit_chains(const NestedDataset& data, const RunConfig& config, const fs::path& out,
                                 const SamplerOptions& options) {
  config.validate();
  const SplineBasis basis = config.basis(data);
  const PreparedData prepared = PreparedData::build(data, basis);
  const Hyperparams hyper = config.hyperparams(prepared);

  ChainManifest base;
  base.model = config.model;
  base.K = config.K;
  base.L = config.model == ModelKind::nested ? config.L : 1;
  base.sweeps = config.sweeps;
  base.burnin = config.burnin;
  base.thin = config.thin;
  base.config_hash = config.hash();
  base.config = config.canonical();
  base.knots = basis.knots();
  base.degree = basis.degree();
  for (const auto& s : data.subjects) {
    base.subject_ids.push_back(s.id);
    std::vector<std::string> reps;
    for (const auto& r : s.replicates) reps.push_back(r.id);
    base.replicate_ids.push_back(std::move(reps));
  }

  std::vector<fs::path> dirs;
  std::vector<std::exception_ptr> errors(config.chains);
  std::vector<std::thread> workers;
  for (std::size_t c = 0; c < config.chains; ++c) {
    dirs.push_back(out / ("chain_" + std::to_string(c)));
    workers.emplace_back([&, c] {
      try {
        ChainManifest manifest = base;
        manifest.chain = c;
        manifest.seed = config.chain_seed(c);
        const RunSettings run = config.run_settings(c);
        ArchiveWriter writer(dirs[c], manifest);
        const DrawSink sink = [&](const RetainedDraw& d) { writer.append(d); };
        if (config.model == ModelKind::mean) {
          run_chain_mean(prepared, hyper, run, options, sink);
        } else {
          run_chain_nested(prepared, hyper, run, options, sink);
        }
        writer.finish();
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return dirs;
}

std::vector<ChainArchive> load_archives(std::span<const fs::path> paths) {
  std::vector<ChainArchive> out;
  for (const auto& p : paths) {
    if (fs::exists(p / "manifest.json")) {
      out.push_back(read_archive(p));
      continue;
    }
    if (!fs::is_directory(p)) throw DataError("no archive at " + p.string());
    std::vector<fs::path> chains;
    for (const auto& entry : fs::directory_iterator(p)) {
      if (entry.is_directory() && entry.path().filename().string().rfind("chain_", 0) == 0) {
        chains.push_back(entry.path());
      }
    }
    if (chains.empty()) throw DataError("no archive at " + p.string());
    std::sort(chains.begin(), chains.end(), [](const fs::path& a, const fs::path& b) {
      const auto index = [](const fs::path& x) { return std::stoul(x.filename().string().substr(6)); };
      return index(a) < index(b);
    });
    for (const auto& c : chains) out.push_back(read_archive(c));
  }
  return out;
}

void summarize(std::span<const ChainArchive> archives, const fs::path& out, std::size_t grid_points) {
  if (archives.empty()) throw std::invalid_argument("summarize needs at least one archive");
  if (grid_points < 2) throw std::invalid_argument("curve grid needs at least two points");
  const auto& manifest = archives.front().manifest;
  std::vector<std::vector<int>> draws;
  for (const auto& a : archives) {
    if (a.manifest.subject_ids != manifest.subject_ids) throw DataError("archives cover different subjects");
    for (const auto& d : a.draws) draws.emplace_back(d.subject_labels.begin(), d.subject_labels.end());
  }
  if (draws.empty()) throw DataError("archives contain no retained draws");

  const Eigen::MatrixXd incidence = incidence_matrix(draws);
  const auto& ids = manifest.subject_ids;
  {
    auto csv = open_output(out / "incidence.csv");
    for (std::size_t i = 0; i < ids.size(); ++i) csv << (i ? "," : "") << ids[i];
    csv << '\n';
    for (Eigen::Index i = 0; i < incidence.rows(); ++i) {
      for (Eigen::Index j = 0; j < incidence.cols(); ++j) csv << (j ? "," : "") << format_double(incidence(i, j));
      csv << '\n';
    }
  }
  {
    const PointPartition best = point_partition(draws, incidence);
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < ids.size(); ++i) j[ids[i]] = best.partition.labels()[i];
    open_output(out / "partition.json") << j.dump(2) << '\n';
  }
  {
    const double lo = manifest.knots.front();
    const double hi = manifest.knots.back();
    std::vector<double> grid(grid_points);
    for (std::size_t g = 0; g < grid_points; ++g) {
      grid[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
    }
    auto csv = open_output(out / "curves.csv");
    csv << "subject_id,replicate_id,grid_x,mean,lo95,hi95\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (const auto& band : reconstruct_curves(archives, i, grid)) {
        const std::string rep = band.replicate ? manifest.replicate_ids[i][*band.replicate] : "";
        for (std::size_t g = 0; g < grid.size(); ++g) {
          csv << ids[i] << ',' << rep << ',' << format_double(grid[g]) << ',' << format_double(band.mean[g]) << ','
              << format_double(band.lo[g]) << ',' << format_double(band.hi[g]) << '\n';
        }
      }
    }
  }
}

void diagnose(std::span<const ChainArchive> archives, const fs::path& out) {
  if (archives.size() < 2) throw std::invalid_argument("diagnose needs at least two chains");
  std::size_t n = archives.front().draws.size();
  for (const auto& a : archives) n = std::min(n, a.draws.size());
  if (n < 2) throw DataError("diagnose needs at least two retained draws per chain");

  using Getter = double (*)(const RetainedDraw&);
  const std::pair<const char*, Getter> stats[] = {
      {"log_posterior", [](const RetainedDraw& d) { return d.log_posterior; }},
      {"clusters", [](const RetainedDraw& d) { return static_cast<double>(d.occupied_top); }},
      {"curve_clusters", [](const RetainedDraw& d) { return static_cast<double>(d.occupied_bottom); }},
      {"omega_frobenius", [](const RetainedDraw& d) { return d.omega_fro; }},
      {"sigma_frobenius", [](const RetainedDraw& d) { return d.sigma_fro; }},
  };
  const bool nested = archives.front().manifest.model == ModelKind::nested;
  nlohmann::ordered_json values = nlohmann::ordered_json::object();
  nlohmann::ordered_json notes = nlohmann::ordered_json::object();
  for (const auto& [name, get] : stats) {
    const std::string key = name;
    if ((key == "curve_clusters" && !nested) || (key == "sigma_frobenius" && nested)) {
      values[key] = nullptr;
      notes[key] = "not monitored by the " + to_string(archives.front().manifest.model) + " model";
      continue;
    }
    std::vector<std::vector<double>> chains;
    for (const auto& a : archives) {
      std::vector<double> trace;
      for (std::size_t t = 0; t < n; ++t) trace.push_back(get(a.draws[t]));
      chains.push_back(std::move(trace));
    }
    const auto r = psrf(chains);
    if (r) {
      values[key] = *r;
    } else {
      values[key] = nullptr;
      notes[key] = "undefined: within-chain variance is zero";
    }
  }
  nlohmann::ordered_json j;
  j["chains"] = archives.size();
  j["draws_per_chain"] = n;
  j["psrf"] = values;
  j["notes"] = notes;
  open_output(out / "psrf.json") << j.dump(2) << '\n';
}

void write_growth(const fs::path& path, const GdpParams& params, std::size_t n_max, std::size_t reps,
                  std::uint64_t seed) {
  params.validate();
  if (n_max == 0) throw std::invalid_argument("n must be at least 1");
  std::vector<double> sum(n_max, 0.0), sum_sq(n_max, 0.0);
  Rng rng(seed);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto counts = simulate_cluster_counts(rng, params, n_max);
    for (std::size_t t = 0; t < n_max; ++t) {
      const auto v = static_cast<double>(counts[t]);
      sum[t] += v;
      sum_sq[t] += v * v;
    }
  }
  auto csv = open_output(path);
  csv << "n,EZ_exact,EW_exact,EW_approx,EZ_mc,mc_se\n";
  const auto R = static_cast<double>(reps);
  double ez = 0.0;
  for (std::size_t t = 1; t <= n_max; ++t) {
    const NewClusterRate w = expected_new_cluster_rate(params, t);
    ez += w.exact;
    csv << t << ',' << format_double(ez) << ',' << format_double(w.exact) << ',' << format_double(w.approx) << ',';
    if (reps == 0) {
      csv << ",\n";
      continue;
    }
    const double mean = sum[t - 1] / R;
    const double var = reps > 1 ? std::max(0.0, (sum_sq[t - 1] - R * mean * mean) / (R - 1.0)) : 0.0;
    csv << format_double(mean) << ',' << format_double(std::sqrt(var / R)) << '\n';
  }
}

void write_structure(const fs::path& path, std::span<const double> ratios, std::size_t points, double min_total,
                     double max_total, std::size_t n, std::size_t reps, std::uint64_t seed) {
  if (points < 2 || !(min_total > 0.0) || !(max_total > min_total)) {
    throw std::invalid_argument("structure grid needs >= 2 points and 0 < min_total < max_total");
  }
  auto csv = open_output(path);
  csv << "ratio,a,b,mean_clusters,se_clusters,mean_largest,mean_block_size\n";
  Rng rng(seed);
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("ratio a/(a+b) must lie in (0, 1)");
    for (std::size_t g = 0; g < points; ++g) {
      const double total =
          min_total * std::pow(max_total / min_total, static_cast<double>(g) / static_cast<double>(points - 1));
      const GdpParams params{r * total, (1.0 - r) * total};
      const StructureSummary s = partition_structure(rng, params, n, reps);
      csv << format_double(r) << ',' << format_double(params.a) << ',' << format_double(params.b) << ','
          << format_double(s.mean_clusters) << ',' << format_double(s.se_clusters) << ','
          << format_double(s.mean_largest) << ',' << format_double(s.mean_block_size) << '\n';
    }
  }
}

}  // namespace nestfc
