#include <doctest.h>

#include <random>

#include "pccal/density.hpp"

using namespace pccal;

TEST_CASE("trapezoid rule is exact for linear integrands") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(11, 0.0, 2.0);
  CHECK(trapezoid(x, (3.0 * x.array() + 1.0).matrix()) == doctest::Approx(8.0));
}

TEST_CASE("constant sample gives a spike at the nearest grid point") {
  const std::vector<double> s(100, 0.3);
  CHECK(silverman_bandwidth(s) == 0.0);
  const auto t = kde(s, 0.0, 1.0, 101);
  CHECK(density_mode(t) == doctest::Approx(0.3));
  CHECK(trapezoid(t.grid, t.density) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("KDE of normal draws is normalized and centered") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> n(1.5, 0.5);
  std::vector<double> s(5000);
  for (auto& v : s) v = n(rng);
  const auto t = kde_auto_range(s);
  CHECK(trapezoid(t.grid, t.density) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(density_mean(t) == doctest::Approx(1.5).epsilon(0.05 / 1.5));
  CHECK(density_mode(t) == doctest::Approx(1.5).epsilon(0.1 / 1.5));
  CHECK(t.bandwidth > 0.0);
  CHECK(t.grid(0) < 1.5 - 4 * 0.5);
}

TEST_CASE("Silverman bandwidth formula") {
  const std::vector<double> s = {1, 2, 3, 4, 5};
  const double sd = std::sqrt(2.5), iqr = 4.0 - 2.0;
  CHECK(silverman_bandwidth(s) == doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(5.0, -0.2)));
}

TEST_CASE("type-7 quantiles and intervals") {
  const std::vector<double> s = {4, 1, 3, 2};
  CHECK(quantile(s, 0.0) == 1.0);
  CHECK(quantile(s, 1.0) == 4.0);
  CHECK(quantile(s, 0.5) == 2.5);
  CHECK(quantile(s, 0.25) == doctest::Approx(1.75));
  std::vector<double> u(1001);
  for (int i = 0; i <= 1000; ++i) u[static_cast<std::size_t>(i)] = i / 1000.0;
  const auto iv = equal_tailed_interval(u);
  CHECK(iv.lower == doctest::Approx(0.025));
  CHECK(iv.upper == doctest::Approx(0.975));
  CHECK(iv.width() == doctest::Approx(0.95));
  CHECK(iv.contains(0.5));
}

TEST_CASE("L1 distance of disjoint boxes is 2 and of identical densities 0") {
  DensityTable a, b;
  a.grid = b.grid = Eigen::VectorXd::LinSpaced(1001, 0.0, 2.0);
  a.density = (a.grid.array() < 1.0).cast<double>();
  b.density = (b.grid.array() > 1.0).cast<double>();
  CHECK(l1_distance(a, b) == doctest::Approx(2.0).epsilon(5e-3));
  CHECK(l1_distance(a, a) == 0.0);
}

TEST_CASE("batch-means standard error of iid draws") {
  std::mt19937_64 rng(62);
  std::normal_distribution<double> n(0.0, 2.0);
  double total = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> s(2500);
    for (auto& v : s) v = n(rng);
    total += batch_means_se(s);
  }
  CHECK(total / reps == doctest::Approx(2.0 / 50.0).epsilon(0.1));
}

TEST_CASE("sample moments") {
  const std::vector<double> s = {2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(sample_mean(s) == 5.0);
  CHECK(sample_sd(s) == doctest::Approx(std::sqrt(32.0 / 7.0)));
}
