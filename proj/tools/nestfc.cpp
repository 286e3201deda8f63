// nestfc: simulate data, fit the mean or nested functional clustering
// model, and summarize or diagnose the resulting chains.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nestfc/commands.hpp"
#include "nestfc/dataset_io.hpp"
#include "nestfc/errors.hpp"

namespace fs = std::filesystem;
using namespace nestfc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct FitFlags {
  std::string dataset;
  std::optional<std::string> config_file, model, out;
  std::optional<std::size_t> K, L, sweeps, burnin, thin, chains;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

RunConfig resolve(const FitFlags& f) {
  RunConfig c;
  if (f.config_file) c.load(*f.config_file);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.model) c.model = parse_model_kind(*f.model);
  if (f.K) c.K = *f.K;
  if (f.L) c.L = *f.L;
  if (f.sweeps) c.sweeps = *f.sweeps;
  if (f.burnin) c.burnin = *f.burnin;
  if (f.thin) c.thin = *f.thin;
  if (f.chains) c.chains = *f.chains;
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian clustering of functional data with (nested) generalized Dirichlet process priors"};
  app.require_subcommand(1);

  // simulate
  std::string scenario = "separated";
  std::size_t per_group = 10, replicates = 5;
  double noise = 0.1;
  std::uint64_t sim_seed = 1;
  std::string sim_out = "simulated";
  auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset (data.csv) and its labels (truth.json)");
  sim->add_option("--scenario", scenario, "separated | confounded")->check(CLI::IsMember({"separated", "confounded"}));
  sim->add_option("--subjects", per_group, "Subjects per group");
  sim->add_option("--replicates", replicates, "Curves per subject");
  sim->add_option("--noise", noise, "Noise sd (confounded scenario only)");
  sim->add_option("--seed", sim_seed);
  sim->add_option("--out", sim_out, "Output directory");

  // fit
  FitFlags ff;
  auto* fit = app.add_subcommand("fit", "Run MCMC chains; one archive directory per chain");
  fit->add_option("dataset", ff.dataset, "Dataset CSV")->required();
  fit->add_option("--config", ff.config_file, "key=value config file");
  fit->add_option("--set", ff.overrides, "Override one config key (key=value); repeatable");
  fit->add_option("--model", ff.model, "mean | nested");
  fit->add_option("--K", ff.K);
  fit->add_option("--L", ff.L);
  fit->add_option("--sweeps", ff.sweeps, "Total sweeps including burn-in");
  fit->add_option("--burnin", ff.burnin);
  fit->add_option("--thin", ff.thin);
  fit->add_option("--chains", ff.chains);
  fit->add_option("--seed", ff.seed);
  fit->add_option("--out", ff.out, "Output directory");

  // summarize / diagnose
  std::vector<std::string> archives;
  std::string post_out = ".";
  std::size_t grid_points = 50;
  auto* summ = app.add_subcommand("summarize", "Write incidence.csv, partition.json and curves.csv");
  summ->add_option("archives", archives, "Chain or fit directories")->required();
  summ->add_option("--out", post_out);
  summ->add_option("--grid", grid_points, "Grid points for curves.csv");
  auto* diag = app.add_subcommand("diagnose", "Write psrf.json");
  diag->add_option("archives", archives, "Chain or fit directories")->required();
  diag->add_option("--out", post_out);

  // gdp
  double a = 1.0, b = 1.0, a2 = 1.0, b2 = 1.0;
  std::size_t n = 100, reps = 2000, J = 1, points = 8;
  std::optional<std::size_t> bound_K, bound_L;
  std::uint64_t gdp_seed = 1;
  std::string gdp_out = "growth.csv";
  std::vector<double> ratios{0.25, 0.5, 0.75};
  double min_total = 0.2, max_total = 50.0;
  auto* gdp = app.add_subcommand("gdp", "Prior properties of the GDP");
  gdp->require_subcommand(1);
  auto* growth = gdp->add_subcommand("growth", "Write growth.csv for n = 1..N");
  growth->add_option("--a", a)->required();
  growth->add_option("--b", b)->required();
  growth->add_option("--n", n);
  growth->add_option("--reps", reps, "Simulated partitions for the Monte Carlo columns");
  growth->add_option("--seed", gdp_seed);
  growth->add_option("--out", gdp_out);
  auto* bound = gdp->add_subcommand("bound", "Print the truncation error bound");
  bound->add_option("--a1", a)->required();
  bound->add_option("--b1", b)->required();
  bound->add_option("--a2", a2);
  bound->add_option("--b2", b2);
  bound->add_option("--K", bound_K, "Top truncation (omit for none)");
  bound->add_option("--L", bound_L, "Bottom truncation (omit for none)");
  bound->add_option("--J", J, "Subjects")->required();
  bound->add_option("--n", n, "Curves per subject");
  auto* structure = gdp->add_subcommand("structure", "Write cluster-structure summaries along constant a/(a+b)");
  structure->add_option("--ratio", ratios, "Values of a/(a+b)");
  structure->add_option("--points", points);
  structure->add_option("--min-total", min_total, "Smallest a+b");
  structure->add_option("--max-total", max_total, "Largest a+b");
  structure->add_option("--n", n);
  structure->add_option("--reps", reps);
  structure->add_option("--seed", gdp_seed);
  structure->add_option("--out", gdp_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) {
      const GeneratorSpec spec = scenario == "separated"
                                     ? scenarios::separated_means(per_group, replicates)
                                     : scenarios::confounded_mixtures(per_group, replicates, noise);
      Rng rng(sim_seed);
      const SimulatedData data = simulate_dataset(rng, spec);
      fs::create_directories(sim_out);
      write_dataset(fs::path(sim_out) / "data.csv", data.data);
      write_truth(fs::path(sim_out) / "truth.json", truth_of(data));
    } else if (*fit) {
      const RunConfig config = resolve(ff);
      const NestedDataset data = read_dataset(fs::path(ff.dataset));
      for (const auto& dir : fit_chains(data, config, config.out)) std::cout << dir.string() << '\n';
    } else if (*summ || *diag) {
      const std::vector<fs::path> paths(archives.begin(), archives.end());
      const auto loaded = load_archives(paths);
      if (*summ) {
        summarize(loaded, post_out, grid_points);
      } else {
        diagnose(loaded, post_out);
      }
    } else if (*growth) {
      write_growth(gdp_out, {a, b}, n, reps, gdp_seed);
    } else if (*bound) {
      const double value = truncation_bound({a, b, a2, b2}, bound_K, bound_L, J, n);
      std::cout << format_double(value) << '\n';
    } else if (*structure) {
      write_structure(gdp_out, ratios, points, min_total, max_total, n, reps, gdp_seed);
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::out_of_range& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
