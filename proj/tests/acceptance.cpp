// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero
// if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nestfc/analysis.hpp"
#include "nestfc/commands.hpp"
#include "nestfc/config.hpp"
#include "nestfc/gdp.hpp"
#include "nestfc/model.hpp"
#include "nestfc/sampler_mean.hpp"
#include "nestfc/sampler_nested.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace nestfc;
using testing_support::batch_means;
using testing_support::MeanSe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- prior

Outcome mc_cluster_counts() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240101);
  int ok = 0, total = 0;
  std::string bad;
  for (const GdpParams p : {GdpParams{0.5, 2}, GdpParams{1, 1}, GdpParams{2, 1}, GdpParams{3, 3}}) {
    for (std::size_t n : {10u, 50u, 200u}) {
      const auto s = partition_structure(rng, p, n, 20000);
      const double z = (s.mean_clusters - expected_clusters(p, n)) / s.se_clusters;
      ++total;
      if (std::abs(z) <= 3.0) {
        ++ok;
      } else {
        bad += " (" + fmt("%g", p.a) + "," + fmt("%g", p.b) + ",n=" + std::to_string(n) + ": z=" + fmt("%.1f", z) + ")";
      }
    }
  }
  const double secs = seconds_since(t0);
  return {ok == total && secs < 120.0, std::to_string(ok) + "/" + std::to_string(total) +
                                           " within 3 SE in " + fmt("%.1f", secs) + " s" +
                                           (bad.empty() ? "" : "; off:" + bad)};
}

Outcome dp_reduction() {
  double worst = 0.0;
  for (double b : {0.5, 1.0, 5.0}) {
    double h = 0.0;
    for (std::size_t n = 1; n <= 1000; ++n) {
      h += b / (b + static_cast<double>(n) - 1.0);
      worst = std::max(worst, std::abs(expected_clusters({1.0, b}, n) - h) / h);
    }
  }
  return {worst <= 1e-10, "max relative error " + fmt("%.2e", worst)};
}

Outcome bounded_growth() {
  const GdpParams p{2.0, 1.0};
  const double inc = expected_clusters(p, 2000) - expected_clusters(p, 1000);
  const auto r = expected_new_cluster_rate(p, 10000);
  const double ratio = r.exact / r.approx;
  const double lead = r.exact / r.leading_order;
  const bool pass = inc < 0.02 && ratio >= 0.9 && ratio <= 1.1;
  return {pass, "E(Z_2000) - E(Z_1000) = " + fmt("%.3e", inc) + "; exact / approx = " + fmt("%.4g", ratio) +
                    " (without the exp(-2(a+1)) factor: " + fmt("%.6f", lead) + ")"};
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size();) {
      std::size_t e = k;
      while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[k]]) ++e;
      for (std::size_t m = k; m <= e; ++m) r[idx[m]] = 0.5 * static_cast<double>(k + e);
      k = e + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Outcome structure_curves(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> ratios{0.25, 0.5, 0.75};
  const auto path = work / "structure.csv";
  write_structure(path, ratios, 8, 0.2, 50.0, 1000, 20000, 7);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> curves;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<std::string> f;
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    curves[f[0]].first.push_back(std::stod(f[3]));
    curves[f[0]].second.push_back(std::stod(f[5]));
  }
  bool pass = curves.size() == 3;
  std::string detail;
  for (const auto& [ratio, xy] : curves) {
    const double rho = spearman(xy.first, xy.second);
    pass = pass && xy.first.size() >= 8 && rho < -0.95;
    detail += "ratio " + ratio + ": rho = " + fmt("%.3f", rho) + "; ";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 600.0;
  return {pass, detail + fmt("%.1f", secs) + " s"};
}

Outcome truncation_closed_forms() {
  const double k1 = truncation_bound({0.7, 1.9, 2.0, 3.0}, 1, std::nullopt, 5, 3);
  const double k21 = truncation_bound({1, 1, 1, 1}, 21, std::nullopt, 10, 1);
  const NestedShapes s{1.0, 1.0, 1.0, 1.0};
  bool monotone = true;
  for (std::size_t K = 2; K <= 11; ++K) {
    for (std::size_t L = 2; L <= 11; ++L) {
      const double v = truncation_bound(s, K, L, 10, 1);
      monotone = monotone && v < truncation_bound(s, K - 1, L, 10, 1) && v < truncation_bound(s, K, L - 1, 10, 1);
    }
  }
  const bool pass = k1 == 4.0 && std::abs(k21 - 3.8147e-5) <= 1e-9 && monotone;
  return {pass, "K=1: " + fmt("%.17g", k1) + "; K=21: " + fmt("%.6e", k21) +
                    (monotone ? "; strictly decreasing on K,L in 2..11" : "; not monotone")};
}

// ---------------------------------------------------------------- recovery

struct Fit {
  PreparedData prepared;
  Hyperparams hyper;
};

Fit prepare(const NestedDataset& data, const RunConfig& config) {
  Fit f{PreparedData::build(data, config.basis(data)), {}};
  f.hyper = config.hyperparams(f.prepared);
  return f;
}

Partition point_estimate(const std::vector<RetainedDraw>& draws) {
  std::vector<std::vector<int>> labels;
  for (const auto& d : draws) labels.emplace_back(d.subject_labels.begin(), d.subject_labels.end());
  return point_partition(labels, incidence_matrix(labels)).partition;
}

double fit_ari(const SimulatedData& sim, const RunConfig& config) {
  const Fit f = prepare(sim.data, config);
  const auto run = config.run_settings(0);
  const auto draws = config.model == ModelKind::mean ? run_chain_mean(f.prepared, f.hyper, run)
                                                     : run_chain_nested(f.prepared, f.hyper, run);
  return adjusted_rand(point_estimate(draws), Partition(sim.subject_labels));
}

Outcome separated_recovery() {
  int good = 0;
  std::string detail;
  double slowest = 0.0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Rng rng(seed);
    const auto sim = simulate_dataset(rng, scenarios::separated_means(10, 5));
    RunConfig c;
    c.model = ModelKind::mean;
    c.sweeps = 2500;
    c.burnin = 500;
    c.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const double ari = fit_ari(sim, c);
    slowest = std::max(slowest, seconds_since(t0));
    good += ari >= 0.9;
    detail += fmt("%.3f", ari) + " ";
  }
  return {good >= 3 && slowest < 300.0,
          "ARI per seed: " + detail + "(" + std::to_string(good) + "/4 >= 0.9), slowest chain " +
              fmt("%.1f", slowest) + " s"};
}

Outcome confounded_discrimination() {
  int good = 0;
  std::string detail;
  double slowest = 0.0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Rng rng(100 + seed);
    const auto sim = simulate_dataset(rng, scenarios::confounded_mixtures(10, 6, 0.1));
    RunConfig nested;
    nested.model = ModelKind::nested;
    nested.sweeps = 1000;
    nested.burnin = 300;
    nested.seed = seed;
    RunConfig mean = nested;
    mean.model = ModelKind::mean;
    mean.sweeps = 2500;
    mean.burnin = 500;
    auto t0 = std::chrono::steady_clock::now();
    const double ari_nested = fit_ari(sim, nested);
    slowest = std::max(slowest, seconds_since(t0));
    t0 = std::chrono::steady_clock::now();
    const double ari_mean = fit_ari(sim, mean);
    slowest = std::max(slowest, seconds_since(t0));
    good += ari_nested >= 0.8 && ari_mean <= 0.3;
    detail += "(" + fmt("%.2f", ari_nested) + ", " + fmt("%.2f", ari_mean) + ") ";
  }
  return {good >= 3 && slowest < 600.0, "(nested, mean) ARI per seed: " + detail + "(" + std::to_string(good) +
                                            "/4 pass), slowest chain " + fmt("%.1f", slowest) + " s"};
}

// ---------------------------------------------------------------- Geweke

struct Moment {
  std::string name;
  MeanSe sampler;
  MeanSe oracle;
  double ess = 0.0;
};

/// First and second moments of a chain trace.
void add_moments(std::vector<Moment>& out, const std::string& name, const std::vector<double>& trace,
                 const MeanSe& m1, const MeanSe& m2) {
  const auto first = batch_means(trace);
  const auto second = batch_means(testing_support::squares(trace));
  const auto ess = [&](const std::vector<double>& xs, const MeanSe& bm) {
    const auto iid = testing_support::iid_mean(xs);
    return static_cast<double>(xs.size()) * (iid.se * iid.se) / (bm.se * bm.se);
  };
  out.push_back({name + " mean", first, m1, ess(trace, first)});
  out.push_back({name + " second moment", second, m2, ess(testing_support::squares(trace), second)});
}

/// Forward Monte Carlo moments of u ~ Beta(a, b), a ~ Gamma(ga), b ~ Gamma(gb).
std::pair<MeanSe, MeanSe> forward_stick_moments(const GammaPrior& ga, const GammaPrior& gb, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> u;
  for (int r = 0; r < 2000000; ++r) {
    const double a = random::gamma(rng, ga.shape, ga.rate);
    const double b = random::gamma(rng, gb.shape, gb.rate);
    u.push_back(random::beta(rng, a, b));
  }
  return {testing_support::iid_mean(u), testing_support::iid_mean(testing_support::squares(u))};
}

MeanSe exact(double v) { return {v, 0.0}; }

Outcome geweke() {
  const auto data = testing_support::toy_dataset(3, 2, 2);
  RunConfig c;
  c.p = 3;
  c.nu1 = 6.0;
  c.nu2 = 0.5;
  c.rho = 4.0;
  c.psi = 8.0;
  const Fit f = prepare(data, c);
  SamplerOptions o;
  o.prior_only = true;
  std::vector<Moment> moments;

  const double eta_sum = c.eta1 + c.eta2;
  const MeanSe gamma1 = exact(c.eta1 / eta_sum);
  const MeanSe gamma2 = exact(c.eta1 * (c.eta1 + 1.0) / (eta_sum * (eta_sum + 1.0)));
  const auto u_mean = forward_stick_moments(c.a, c.b, 11);
  const auto u_nested_top = forward_stick_moments(c.a1, c.b1, 12);
  const auto u_nested_bottom = forward_stick_moments(c.a2, c.b2, 13);
  const std::size_t sweeps = 300000, burn = 2000;
  {
    MeanSampler s(f.prepared, f.hyper, 5, o, 21);
    std::vector<double> g, s2, u;
    for (std::size_t t = 0; t < sweeps + burn; ++t) {
      s.sweep(t < burn);
      if (t < burn) continue;
      g.push_back(s.state().gamma);
      s2.push_back(s.state().atoms[0].sigma2);
      u.push_back(s.state().sticks.fractions()[0]);
    }
    const double v1 = c.nu1, v2 = c.nu2;
    add_moments(moments, "mean gamma", g, gamma1, gamma2);
    add_moments(moments, "mean sigma2", s2, exact(v2 / (v1 - 1.0)), exact(v2 * v2 / ((v1 - 1.0) * (v1 - 2.0))));
    add_moments(moments, "mean u1", u, u_mean.first, u_mean.second);
  }
  {
    NestedSampler s(f.prepared, f.hyper, 4, 3, o, 22);
    std::vector<double> g, nu2, v, u;
    for (std::size_t t = 0; t < sweeps + burn; ++t) {
      s.sweep(t < burn);
      if (t < burn) continue;
      g.push_back(s.state().gamma);
      nu2.push_back(s.state().nu2);
      v.push_back(s.state().top.fractions()[0]);
      u.push_back(s.state().bottom[0].fractions()[0]);
    }
    add_moments(moments, "nested gamma", g, gamma1, gamma2);
    add_moments(moments, "nested nu2", nu2, exact(c.rho / c.psi), exact(c.rho * (c.rho + 1.0) / (c.psi * c.psi)));
    add_moments(moments, "nested v1", v, u_nested_top.first, u_nested_top.second);
    add_moments(moments, "nested u11", u, u_nested_bottom.first, u_nested_bottom.second);
  }
  bool pass = true;
  double worst_z = 0.0, min_ess = 1e300;
  std::string bad;
  for (const auto& m : moments) {
    const double se = std::sqrt(m.sampler.se * m.sampler.se + m.oracle.se * m.oracle.se);
    const double z = (m.sampler.mean - m.oracle.mean) / se;
    worst_z = std::max(worst_z, std::abs(z));
    min_ess = std::min(min_ess, m.ess);
    if (std::abs(z) > 3.0 || m.ess < 5000.0) {
      pass = false;
      bad += " " + m.name + " (z=" + fmt("%.2f", z) + ", ess=" + fmt("%.0f", m.ess) + ")";
    }
  }
  return {pass, std::to_string(moments.size()) + " moments, max |z| = " + fmt("%.2f", worst_z) +
                    ", min ESS = " + fmt("%.0f", min_ess) + (bad.empty() ? "" : "; off:" + bad)};
}

// ---------------------------------------------------------------- collapse

Outcome nesting_collapse() {
  // Two clear groups plus one subject between them whose co-clustering
  // probability with the first group is near 1/2. Switching between "joins
  // the group" and "own cluster" is slow for both samplers, so many long
  // chains are pooled and incidences are accumulated on the fly.
  auto data = testing_support::toy_dataset(8, 3, 2, 0.5);
  {
    Rng rng(77);
    Subject mid{"mid", {}};
    for (int j = 0; j < 2; ++j) {
      Replicate r{"r" + std::to_string(j), data.subjects[0].replicates[0].x, {}};
      for (double x : r.x) r.y.push_back(0.25 * (x - 2.0) + 0.5 * random::normal(rng));
      mid.replicates.push_back(std::move(r));
    }
    data.subjects.push_back(std::move(mid));
  }
  RunConfig c;
  c.p = 4;
  const Fit f = prepare(data, c);
  Hyperparams h = f.hyper;
  h.a1 = h.a;
  h.b1 = h.b;

  RunSettings run;
  run.K = 6;
  run.L = 1;
  run.sweeps = 102000;
  run.burnin = 2000;
  SamplerOptions mean_opts;
  mean_opts.fixed_sigma = 1e-10 * Eigen::MatrixXd::Identity(f.prepared.dim, f.prepared.dim);
  SamplerOptions nested_opts;
  nested_opts.update_nu2 = false;

  const auto n = static_cast<Eigen::Index>(data.num_subjects());
  Eigen::MatrixXd pm = Eigen::MatrixXd::Zero(n, n), pn = pm;
  std::size_t draws_m = 0, draws_n = 0;
  const auto accumulate = [n](Eigen::MatrixXd& p, std::size_t& count) {
    return [&p, &count, n](const RetainedDraw& d) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          p(i, j) += d.subject_labels[static_cast<std::size_t>(i)] == d.subject_labels[static_cast<std::size_t>(j)];
      ++count;
    };
  };
  for (std::uint64_t chain = 0; chain < 12; ++chain) {
    run.seed = mix_seed(2 * chain);
    run_chain_mean(f.prepared, h, run, mean_opts, accumulate(pm, draws_m));
    run.seed = mix_seed(2 * chain + 1);
    run_chain_nested(f.prepared, h, run, nested_opts, accumulate(pn, draws_n));
  }
  pm /= static_cast<double>(draws_m);
  pn /= static_cast<double>(draws_n);
  const double gap = (pm - pn).cwiseAbs().maxCoeff();
  const bool pass = gap <= 0.05 && draws_m >= 20000 && draws_n >= 20000;
  return {pass, std::to_string(draws_m) + " draws each; max |P_mean - P_nested| = " + fmt("%.4f", gap) +
                    "; middle subject with the first group: " + fmt("%.3f", pm(6, 0)) + " vs " + fmt("%.3f", pn(6, 0))};
}

// ---------------------------------------------------------------- diagnostics

Outcome psrf_checks() {
  Rng rng(31);
  std::vector<double> chain;
  for (int t = 0; t < 500; ++t) chain.push_back(random::normal(rng));
  const std::vector<std::vector<double>> dup{chain, chain};
  const double err = std::abs(*psrf(dup) - std::sqrt(499.0 / 500.0));
  std::vector<std::vector<double>> apart(3);
  for (std::size_t c = 0; c < 3; ++c)
    for (int t = 0; t < 500; ++t) apart[c].push_back(2.0 * static_cast<double>(c) + random::normal(rng));
  const double r = *psrf(apart);
  return {err <= 1e-12 && r > 1.2, "duplicated error " + fmt("%.1e", err) + "; divergent " + fmt("%.3f", r)};
}

// ---------------------------------------------------------------- determinism

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no CLI binary given (--cli)"};
  const std::string q = "'" + cli + "'";
  const auto script = [&](const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = "'" + dir.string() + "'";
    int rc = 0;
    rc |= run(q + " simulate --scenario confounded --subjects 3 --replicates 3 --seed 9 --out " + d + "/sim");
    rc |= run(q + " fit " + d + "/sim/data.csv --model mean --K 5 --sweeps 60 --burnin 20 --chains 2 --seed 4 --out " +
              d + "/fit_mean");
    rc |= run(q + " fit " + d +
              "/sim/data.csv --model nested --K 4 --L 3 --sweeps 60 --burnin 20 --chains 2 --seed 4 --out " + d +
              "/fit_nested");
    for (const char* m : {"mean", "nested"}) {
      rc |= run(q + " summarize " + d + "/fit_" + m + " --grid 7 --out " + d + "/post_" + m);
      rc |= run(q + " diagnose " + d + "/fit_" + m + " --out " + d + "/post_" + m);
    }
    rc |= run(q + " gdp growth --a 0.5 --b 2 --n 40 --reps 300 --seed 3 --out " + d + "/growth.csv");
    rc |= run(q + " gdp structure --points 3 --n 40 --reps 100 --seed 3 --out " + d + "/structure.csv");
    rc |= std::system((q + " gdp bound --a1 1 --b1 1 --a2 2 --b2 2 --K 10 --L 8 --J 5 --n 3 > " + d + "/bound.txt")
                          .c_str());
    return rc;
  };
  const auto a = work / "det_a", b = work / "det_b";
  if (script(a) != 0 || script(b) != 0) return {false, "a CLI command failed"};
  std::size_t files = 0;
  std::string diff;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) diff += " " + rel.string();
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) files_b += e.is_regular_file();
  const bool pass = diff.empty() && files == files_b && files > 0;
  return {pass, std::to_string(files) + " artifacts compared" + (diff.empty() ? "" : "; differing:" + diff)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string cli;
  std::string work = (fs::temp_directory_path() / "nestfc_acceptance").string();
  app.add_option("--only", only, "Run only these criteria (1-11)");
  app.add_option("--cli", cli, "Path to the nestfc binary");
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  const fs::path scratch = fs::path(work) / ("run_" + (only.empty() ? std::string("all") : std::to_string(only[0])));
  fs::create_directories(scratch);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"expected cluster count vs simulation", mc_cluster_counts},
      {"Dirichlet process reduction", dp_reduction},
      {"bounded growth for a > 1", bounded_growth},
      {"partition structure curves", [&] { return structure_curves(scratch); }},
      {"truncation bound closed forms", truncation_closed_forms},
      {"mean model recovery", separated_recovery},
      {"nested model discrimination", confounded_discrimination},
      {"prior-only sampler moments", geweke},
      {"nesting collapse", nesting_collapse},
      {"potential scale reduction", psrf_checks},
      {"CLI determinism", [&] { return cli_determinism(cli, scratch); }},
  };
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome r;
    try {
      r = criteria[k].second();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    all = all && r.pass;
    std::cout << "criterion " << id << " " << (r.pass ? "PASS" : "FAIL") << " [" << criteria[k].first << "] "
              << r.detail << std::endl;
  }
  return all ? 0 : 1;
}
