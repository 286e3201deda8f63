#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nestfc/archive.hpp"
#include "nestfc/config.hpp"
#include "nestfc/dataset_io.hpp"
#include "nestfc/errors.hpp"
#include "test_support.hpp"

using namespace nestfc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("nestfc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RetainedDraw sample_draw(bool nested) {
  RetainedDraw d;
  d.iteration = 41;
  d.log_posterior = -123.456789012345678;
  d.a = 0.1 + 0.2;
  d.b = 3.0;
  if (nested) {
    d.a2 = 1e-300;
    d.b2 = 7.25;
    d.nu2 = 0.04;
    d.curve_labels = {0, 1, 1, 0};
    d.occupied_bottom = 2;
  } else {
    d.sigma_fro = std::sqrt(2.0);
  }
  d.gamma = 1.0 / 3.0;
  d.omega_fro = 12.5;
  d.occupied_top = 2;
  d.subject_labels = {3, 5};
  d.atoms = {{3, 0.5, {1, 0, 1}, {1.0, -2.0, 3.0}}, {5, 2.0, {1, 1, 1}, {0.0, 1e-17, -0.0}}};
  return d;
}

bool same_double(double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; }

void check_same(const RetainedDraw& x, const RetainedDraw& y) {
  CHECK(x.iteration == y.iteration);
  CHECK(same_double(x.log_posterior, y.log_posterior));
  CHECK(same_double(x.a, y.a));
  CHECK(same_double(x.b, y.b));
  CHECK(same_double(x.a2, y.a2));
  CHECK(same_double(x.b2, y.b2));
  CHECK(same_double(x.gamma, y.gamma));
  CHECK(same_double(x.nu2, y.nu2));
  CHECK(same_double(x.omega_fro, y.omega_fro));
  CHECK(same_double(x.sigma_fro, y.sigma_fro));
  CHECK(x.occupied_top == y.occupied_top);
  CHECK(x.occupied_bottom == y.occupied_bottom);
  CHECK(x.subject_labels == y.subject_labels);
  CHECK(x.curve_labels == y.curve_labels);
  REQUIRE(x.atoms.size() == y.atoms.size());
  for (std::size_t k = 0; k < x.atoms.size(); ++k) {
    CHECK(x.atoms[k].key == y.atoms[k].key);
    CHECK(x.atoms[k].sigma2 == y.atoms[k].sigma2);
    CHECK(x.atoms[k].lambda == y.atoms[k].lambda);
    CHECK(x.atoms[k].theta == y.atoms[k].theta);
  }
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("draw encoding round trip") {
  for (bool nested : {false, true}) {
    const auto d = sample_draw(nested);
    check_same(d, decode_draw(encode_draw(d)));
  }
  auto bytes = encode_draw(sample_draw(true));
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_draw(bytes), DataError);
}

TEST_CASE("archive round trip") {
  const auto dir = scratch("archive");
  ChainArchive a;
  a.manifest.model = ModelKind::nested;
  a.manifest.chain = 1;
  a.manifest.seed = 0xfedcba9876543210ULL;
  a.manifest.K = 4;
  a.manifest.L = 3;
  a.manifest.sweeps = 10;
  a.manifest.burnin = 2;
  a.manifest.thin = 4;
  a.manifest.config_hash = "0123456789abcdef";
  a.manifest.subject_ids = {"s1", "s2"};
  a.manifest.replicate_ids = {{"r1", "r2"}, {"r1", "r2"}};
  a.manifest.knots = {0.1, 1.0 / 3.0, 2.0};
  a.manifest.config = {{"K", "4"}, {"model", "nested"}};
  a.draws = {sample_draw(true), sample_draw(true)};
  a.draws[1].iteration = 45;
  a.manifest.draw_count = 2;
  write_archive(dir, a);
  const auto b = read_archive(dir);
  CHECK(b.manifest.model == ModelKind::nested);
  CHECK(b.manifest.chain == 1);
  CHECK(b.manifest.seed == a.manifest.seed);
  CHECK(b.manifest.K == 4);
  CHECK(b.manifest.L == 3);
  CHECK(b.manifest.thin == 4);
  CHECK(b.manifest.config_hash == a.manifest.config_hash);
  CHECK(b.manifest.subject_ids == a.manifest.subject_ids);
  CHECK(b.manifest.replicate_ids == a.manifest.replicate_ids);
  CHECK(b.manifest.knots == a.manifest.knots);
  CHECK(b.manifest.config == a.manifest.config);
  REQUIRE(b.draws.size() == 2);
  check_same(a.draws[0], b.draws[0]);
  check_same(a.draws[1], b.draws[1]);

  CHECK_THROWS_AS(read_archive(dir / "missing"), DataError);
  // truncated draw stream
  const auto bin = dir / "draws.bin";
  fs::resize_file(bin, fs::file_size(bin) - 3);
  CHECK_THROWS_AS(read_archive(dir), DataError);
}

TEST_CASE("config keys, files and hashing") {
  RunConfig c;
  c.set("K", "12");
  c.set("model", "nested");
  c.set("b2_rate", "0.5");
  c.set("nu_omega", "20");
  CHECK(c.K == 12);
  CHECK(c.model == ModelKind::nested);
  CHECK(c.b2.rate == 0.5);
  CHECK(*c.nu_omega == 20.0);
  CHECK_THROWS_AS(c.set("bogus", "1"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("K", "twelve"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("K", "12x"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("model", "other"), std::invalid_argument);

  const auto dir = scratch("config");
  {
    std::ofstream f(dir / "run.cfg");
    f << "# a comment\n\nK = 12\nmodel=nested\n  b2_rate = 0.5 \nnu_omega=20\n";
  }
  RunConfig loaded;
  loaded.load(dir / "run.cfg");
  CHECK(loaded.canonical() == c.canonical());
  CHECK(loaded.hash() == c.hash());
  CHECK(c.hash().size() == 16);

  loaded.out = "elsewhere";
  CHECK(loaded.hash() == c.hash());
  loaded.set("seed", "2");
  CHECK(loaded.hash() != c.hash());
  CHECK(loaded.chain_seed(0) != c.chain_seed(0));
  CHECK(c.chain_seed(0) != c.chain_seed(1));

  {
    std::ofstream f(dir / "bad.cfg");
    f << "K=3\nnot a pair\n";
  }
  try {
    RunConfig bad;
    bad.load(dir / "bad.cfg");
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  RunConfig inconsistent;
  inconsistent.burnin = inconsistent.sweeps;
  CHECK_THROWS_AS(inconsistent.validate(), std::invalid_argument);
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("dataset csv round trip") {
  const auto d = testing_support::toy_dataset(7, 2, 2, 0.3);
  std::stringstream ss;
  write_dataset(ss, d);
  const auto back = read_dataset(ss);
  REQUIRE(back.subjects.size() == d.subjects.size());
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    CHECK(back.subjects[i].id == d.subjects[i].id);
    REQUIRE(back.subjects[i].replicates.size() == d.subjects[i].replicates.size());
    for (std::size_t j = 0; j < d.subjects[i].replicates.size(); ++j) {
      CHECK(back.subjects[i].replicates[j].id == d.subjects[i].replicates[j].id);
      CHECK(back.subjects[i].replicates[j].x == d.subjects[i].replicates[j].x);
      CHECK(back.subjects[i].replicates[j].y == d.subjects[i].replicates[j].y);
    }
  }
}

TEST_CASE("dataset csv parsing") {
  std::istringstream shuffled(
      "\xEF\xBB\xBFsubject_id,replicate_id,x,y\n"
      "b,1,0,1.5\n"
      "a,1,0,2\n"
      "\n"
      "b,1,1,2.5\n"
      "a,2,0,3\n");
  const auto d = read_dataset(shuffled);
  REQUIRE(d.subjects.size() == 2);
  CHECK(d.subjects[0].id == "b");
  CHECK(d.subjects[0].replicates[0].y == std::vector<double>{1.5, 2.5});
  CHECK(d.subjects[1].replicates.size() == 2);

  const auto line_of = [](const std::string& text) -> std::string {
    std::istringstream in(text);
    try {
      read_dataset(in, "f.csv");
    } catch (const DataError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(line_of("subject,replicate,x,y\n").find("f.csv:1") != std::string::npos);
  CHECK(line_of("subject_id,replicate_id,x,y\na,1,0,1\na,1,zz,1\n").find("f.csv:3") != std::string::npos);
  CHECK(line_of("subject_id,replicate_id,x,y\na,1,0\n").find("f.csv:2") != std::string::npos);
  CHECK(line_of("subject_id,replicate_id,x,y\na,1,0,nan\n").find("f.csv:2") != std::string::npos);
  CHECK_FALSE(line_of("subject_id,replicate_id,x,y\n").empty());
}

TEST_CASE("truth labels round trip") {
  nestfc::Rng rng(3);
  const auto sim = simulate_dataset(rng, scenarios::confounded_mixtures(2, 3, 0.1));
  const auto truth = truth_of(sim);
  const auto dir = scratch("truth");
  write_truth(dir / "truth.json", truth);
  const auto back = read_truth(dir / "truth.json");
  CHECK(back.subject_ids == truth.subject_ids);
  CHECK(back.subject_labels == truth.subject_labels);
  CHECK(back.replicate_ids == truth.replicate_ids);
  CHECK(back.curve_labels == truth.curve_labels);
  CHECK(truth.subject_labels == sim.subject_labels);
}

}  // TEST_SUITE
