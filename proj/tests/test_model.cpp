#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nestfc/errors.hpp"
#include "nestfc/model.hpp"
#include "nestfc/numeric.hpp"

using namespace nestfc;

namespace {

ClusterAtom make_atom(std::vector<double> theta, double sigma2, std::vector<std::uint8_t> lambda) {
  ClusterAtom a;
  a.theta = Eigen::Map<Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  a.sigma2 = sigma2;
  a.lambda = std::move(lambda);
  return a;
}

double naive_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const ClusterAtom& atom) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    double mean = 0.0;
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
      if (atom.lambda[static_cast<std::size_t>(k)]) mean += X(t, k) * atom.theta(k);
    }
    const double r = y(t) - mean;
    total += -0.5 * std::log(2.0 * std::numbers::pi * atom.sigma2) - r * r / (2.0 * atom.sigma2);
  }
  return total;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("dataset validation") {
  NestedDataset d;
  CHECK_THROWS_AS(d.validate(), DataError);
  d.subjects.push_back({"s1", {}});
  CHECK_THROWS_AS(d.validate(), DataError);
  d.subjects[0].replicates.push_back({"r1", {1.0, 2.0}, {0.5}});
  CHECK_THROWS_AS(d.validate(), DataError);
  d.subjects[0].replicates[0].y.push_back(std::nan(""));
  CHECK_THROWS_AS(d.validate(), DataError);
  d.subjects[0].replicates[0].y[1] = 1.0;
  CHECK_NOTHROW(d.validate());
  d.subjects.push_back({"s2", {{"a", {0.0}, {1.0}}, {"b", {-3.0, 5.0, 1.0}, {1, 2, 3}}}});
  CHECK(d.num_curves() == 3);
  CHECK(d.num_observations() == 6);
  CHECK(d.x_range() == std::pair<double, double>{-3.0, 5.0});
}

TEST_CASE("curve log-likelihood") {
  const auto basis = SplineBasis::equally_spaced(0.0, 4.0, 3, 1);
  const std::vector<double> xs{0.0, 0.5, 1.5, 3.0, 4.0};
  const Eigen::MatrixXd X = basis.design(xs);
  auto atom = make_atom({0.3, -1.0, 2.0, 0.5}, 1.0 / (2.0 * std::numbers::pi), {1, 1, 0, 1});
  const Eigen::VectorXd exact = X * atom.effective();
  CHECK(std::abs(loglik_curve(exact, X, atom)) < 1e-12);

  auto intercept_only = make_atom({0.0, 5.0, 5.0, 5.0}, 0.7, {1, 0, 0, 0});
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(5);
  CHECK(loglik_curve(zeros, X, intercept_only) ==
        doctest::Approx(-2.5 * std::log(2.0 * std::numbers::pi * 0.7)).epsilon(1e-14));

  Rng rng(4);
  for (int r = 0; r < 50; ++r) {
    Eigen::VectorXd y(5);
    for (auto& v : y) v = 3.0 * random::normal(rng);
    auto a = make_atom({random::normal(rng), random::normal(rng), random::normal(rng), random::normal(rng)},
                       0.1 + random::uniform(rng), {1, static_cast<std::uint8_t>(r % 2), 1, static_cast<std::uint8_t>(r % 3 != 0)});
    CHECK(std::abs(loglik_curve(y, X, a) - naive_loglik(y, X, a)) < 1e-10);
  }
  atom.sigma2 = 0.0;
  CHECK_THROWS_AS(loglik_curve(exact, X, atom), std::invalid_argument);
}

TEST_CASE("marginal subject likelihood limits and scalar case") {
  const auto basis = SplineBasis::equally_spaced(0.0, 4.0, 3, 1);
  Rng rng(8);
  std::vector<CurveData> curves;
  for (int j = 0; j < 3; ++j) {
    std::vector<double> xs{0.0, 1.0, 2.5, 3.5};
    Eigen::VectorXd y(4);
    for (auto& v : y) v = random::normal(rng);
    curves.push_back({basis.design(xs), y});
  }
  const auto atom = make_atom({0.2, 0.1, -0.4, 0.3}, 0.5, {1, 1, 0, 1});
  double direct = 0.0;
  for (const auto& c : curves) direct += loglik_curve(c.y, c.design, atom);
  CHECK(std::abs(marginal_loglik_subject(curves, atom, 1e-10 * Eigen::MatrixXd::Identity(4, 4)) - direct) < 1e-6);

  // one point: variance sigma^2 (1 + b Sigma b^T)
  const SplineBasis one({0.0}, 1);
  const std::vector<double> x{2.0};
  const Eigen::MatrixXd b = one.design(x);
  Eigen::MatrixXd sigma(2, 2);
  sigma << 1.5, 0.3, 0.3, 0.8;
  const auto a1 = make_atom({0.4, 0.7}, 0.6, {1, 1});
  const double var = 0.6 * (1.0 + (b * sigma * b.transpose())(0, 0));
  const double mean = 0.4 + 0.7 * 2.0;
  Eigen::VectorXd y1(1);
  y1 << 1.1;
  const std::vector<CurveData> single{{b, y1}};
  const double oracle = -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (1.1 - mean) * (1.1 - mean) / var;
  CHECK(marginal_loglik_subject(single, a1, sigma) == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("marginal subject likelihood matches Monte Carlo integration") {
  // theta_ij ~ N(Lambda theta, sigma^2 Sigma); average the conditional density.
  const SplineBasis basis({0.0}, 1);
  const std::vector<double> xs{0.5, 1.5};
  const Eigen::MatrixXd X = basis.design(xs);
  Eigen::VectorXd y(2);
  y << 0.9, 1.7;
  Eigen::MatrixXd sigma(2, 2);
  sigma << 0.5, 0.1, 0.1, 0.3;
  const auto atom = make_atom({0.3, 0.8}, 0.4, {1, 1});
  const std::vector<CurveData> curves{{X, y}};
  const double target = marginal_loglik_subject(curves, atom, sigma);

  Rng rng(21);
  const Eigen::MatrixXd chol = (atom.sigma2 * sigma).llt().matrixL();
  const int M = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int m = 0; m < M; ++m) {
    Eigen::VectorXd z(2);
    z << random::normal(rng), random::normal(rng);
    ClusterAtom draw = atom;
    draw.theta = atom.theta + chol * z;
    const double v = std::exp(loglik_curve(y, X, draw));
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / M;
  const double rel_se = std::sqrt((sum2 / M - mean * mean) / M) / mean;
  CHECK(std::abs(std::log(mean) - target) < 4.0 * rel_se);
}

TEST_CASE("unit-information scale") {
  Eigen::MatrixXd B1(3, 2), B2(2, 2);
  B1 << 1, 0, 1, 1, 1, 2;
  B2 << 1, 3, 1, -1;
  const std::vector<Eigen::MatrixXd> designs{B1, B2};
  const Eigen::MatrixXd hand = (B1.transpose() * B1 + B2.transpose() * B2) / 5.0;
  const Eigen::MatrixXd scale = unit_information_scale(designs);
  CHECK((scale - hand).cwiseAbs().maxCoeff() < 1e-7 * hand.trace());
  CHECK((scale - scale.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(is_spd(scale));
  const std::vector<Eigen::MatrixXd> doubled{B1, B2, B1, B2};
  CHECK((unit_information_scale(doubled) - scale).cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::MatrixXd orthonormal = Eigen::MatrixXd::Identity(4, 4);
  const std::vector<Eigen::MatrixXd> single{orthonormal};
  CHECK((unit_information_scale(single) - 0.25 * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);

  // collinear columns still come out SPD
  Eigen::MatrixXd col(3, 2);
  col << 1, 1, 1, 1, 1, 1;
  const std::vector<Eigen::MatrixXd> singular{col};
  CHECK(is_spd(unit_information_scale(singular)));
}

TEST_CASE("simulated datasets") {
  GeneratorSpec spec;
  spec.grid = {0.0, 1.0, 2.0};
  spec.shapes = {{1.0, 2.0, 3.0}};
  spec.group_mixtures = {{1.0}};
  spec.subjects_per_group = {4};
  spec.replicates_per_subject = 2;
  Rng rng(1);
  const auto flat = simulate_dataset(rng, spec);
  for (const auto& s : flat.data.subjects)
    for (const auto& r : s.replicates) CHECK(r.y == spec.shapes[0]);

  const auto sep = scenarios::separated_means(5, 3);
  Rng r1(9), r2(9);
  const auto d1 = simulate_dataset(r1, sep);
  const auto d2 = simulate_dataset(r2, sep);
  CHECK(d1.subject_labels == d2.subject_labels);
  for (std::size_t i = 0; i < d1.data.subjects.size(); ++i) {
    CHECK(d1.data.subjects[i].id == d2.data.subjects[i].id);
    for (std::size_t j = 0; j < 3; ++j) CHECK(d1.data.subjects[i].replicates[j].y == d2.data.subjects[i].replicates[j].y);
  }
  CHECK(d1.data.subjects.front().id == "s01");
  CHECK(d1.data.subjects.back().id == "s15");

  // Each curve's nearest shape is its generating shape.
  for (std::size_t i = 0; i < d1.data.subjects.size(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const auto& y = d1.data.subjects[i].replicates[j].y;
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t k = 0; k < sep.shapes.size(); ++k) {
        double ss = 0.0;
        for (std::size_t t = 0; t < y.size(); ++t) ss += (y[t] - sep.shapes[k][t]) * (y[t] - sep.shapes[k][t]);
        if (ss < best_d) {
          best_d = ss;
          best = k;
        }
      }
      CHECK(static_cast<int>(best) == d1.curve_labels[i][j]);
      CHECK(d1.curve_labels[i][j] == d1.subject_labels[i]);
    }
  }
  CHECK(sep.noise_sd == doctest::Approx(0.2 * min_shape_separation(sep)));

  // confounded design: the group-B mixture averages to the group-A shape
  const auto conf = scenarios::confounded_mixtures(2, 2, 0.1);
  for (std::size_t t = 0; t < conf.grid.size(); ++t) {
    CHECK(0.5 * (conf.shapes[0][t] + conf.shapes[2][t]) == doctest::Approx(conf.shapes[1][t]));
  }
  CHECK_THROWS_AS(simulate_dataset(rng, GeneratorSpec{}), std::invalid_argument);
}

}  // TEST_SUITE
