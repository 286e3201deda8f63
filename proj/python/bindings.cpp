#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nestfc/analysis.hpp"
#include "nestfc/commands.hpp"
#include "nestfc/dataset_io.hpp"
#include "nestfc/errors.hpp"
#include "nestfc/gdp.hpp"
#include "nestfc/model.hpp"

namespace py = pybind11;
using namespace nestfc;

namespace {

std::vector<std::vector<int>> labels_of(const std::vector<ChainArchive>& archives) {
  std::vector<std::vector<int>> out;
  for (const auto& a : archives)
    for (const auto& d : a.draws) out.emplace_back(d.subject_labels.begin(), d.subject_labels.end());
  return out;
}

py::dict dataset_dict(const NestedDataset& d) {
  py::dict out;
  for (const auto& s : d.subjects) {
    py::dict reps;
    for (const auto& r : s.replicates) reps[py::str(r.id)] = py::make_tuple(r.x, r.y);
    out[py::str(s.id)] = reps;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_nestfc, m) {
  m.doc() = "Functional data clustering with generalized Dirichlet process priors";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("expected_clusters", [](double a, double b, std::size_t n) { return expected_clusters({a, b}, n); },
        py::arg("a"), py::arg("b"), py::arg("n"));
  m.def("expected_new_cluster", [](double a, double b, std::size_t n) { return expected_new_cluster({a, b}, n); },
        py::arg("a"), py::arg("b"), py::arg("n"));
  m.def(
      "simulate_partition",
      [](double a, double b, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return simulate_partition(rng, {a, b}, n).labels();
      },
      py::arg("a"), py::arg("b"), py::arg("n"), py::arg("seed") = 1);
  m.def(
      "truncation_bound",
      [](double a1, double b1, double a2, double b2, std::optional<std::size_t> K, std::optional<std::size_t> L,
         std::size_t J, std::size_t n) { return truncation_bound({a1, b1, a2, b2}, K, L, J, n); },
      py::arg("a1"), py::arg("b1"), py::arg("a2") = 1.0, py::arg("b2") = 1.0, py::arg("K") = py::none(),
      py::arg("L") = py::none(), py::arg("J") = 1, py::arg("n") = 1);

  m.def(
      "simulate",
      [](const std::string& scenario, std::size_t subjects, std::size_t replicates, double noise,
         std::uint64_t seed, const std::filesystem::path& out) {
        const GeneratorSpec spec = scenario == "separated" ? scenarios::separated_means(subjects, replicates)
                                   : scenario == "confounded"
                                       ? scenarios::confounded_mixtures(subjects, replicates, noise)
                                       : throw std::invalid_argument("unknown scenario '" + scenario + "'");
        Rng rng(seed);
        const auto sim = simulate_dataset(rng, spec);
        std::filesystem::create_directories(out);
        write_dataset(out / "data.csv", sim.data);
        write_truth(out / "truth.json", truth_of(sim));
        return sim.subject_labels;
      },
      py::arg("scenario"), py::arg("subjects") = 10, py::arg("replicates") = 5, py::arg("noise") = 0.1,
      py::arg("seed") = 1, py::arg("out"),
      "Write data.csv and truth.json into `out`; returns the generating subject groups.");

  m.def(
      "read_dataset", [](const std::filesystem::path& path) { return dataset_dict(read_dataset(path)); },
      py::arg("path"), "{subject id: {replicate id: (x, y)}}");

  m.def(
      "fit",
      [](const std::filesystem::path& dataset, const std::filesystem::path& out,
         const std::map<std::string, std::string>& settings) {
        RunConfig config;
        for (const auto& [k, v] : settings) config.set(k, v);
        config.validate();
        const auto data = read_dataset(dataset);
        py::gil_scoped_release release;
        return fit_chains(data, config, out);
      },
      py::arg("dataset"), py::arg("out"), py::arg("settings") = std::map<std::string, std::string>{},
      "Run MCMC chains; `settings` holds config keys such as {'model': 'nested', 'K': '20'}. Returns the chain "
      "directories.");

  m.def(
      "summarize",
      [](const std::vector<std::filesystem::path>& archives, const std::filesystem::path& out, std::size_t grid) {
        summarize(load_archives(archives), out, grid);
      },
      py::arg("archives"), py::arg("out"), py::arg("grid") = 50);
  m.def(
      "diagnose",
      [](const std::vector<std::filesystem::path>& archives, const std::filesystem::path& out) {
        diagnose(load_archives(archives), out);
      },
      py::arg("archives"), py::arg("out"));

  m.def(
      "posterior_partition",
      [](const std::vector<std::filesystem::path>& archives) {
        const auto labels = labels_of(load_archives(archives));
        const Eigen::MatrixXd incidence = incidence_matrix(labels);
        return py::make_tuple(point_partition(labels, incidence).partition.labels(), incidence);
      },
      py::arg("archives"), "(point partition labels, co-clustering matrix) over every retained draw.");

  m.def("psrf", [](const std::vector<std::vector<double>>& chains) { return psrf(chains); }, py::arg("chains"));
  m.def(
      "adjusted_rand",
      [](const std::vector<int>& p, const std::vector<int>& q) { return adjusted_rand(Partition(p), Partition(q)); },
      py::arg("p"), py::arg("q"));
}
