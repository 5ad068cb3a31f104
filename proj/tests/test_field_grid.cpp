#include <doctest.h>

#include <random>
#include <set>

#include "pccal/errors.hpp"
#include "pccal/experiments.hpp"
#include "pccal/field_grid.hpp"

using namespace pccal;

namespace {

GridField field_2x2(std::vector<std::uint8_t> mask = {1, 1, 1, 1}) {
  GridSpec spec({0.0, 10.0}, {-5.0, 5.0}, {100.0});
  return GridField(spec, {1.0, 2.0, 3.0, 4.0}, std::move(mask));
}

/// Random masked field with random positive volumes.
GridField random_field(std::mt19937_64& rng, int nlon, int nlat, int ndepth, double mask_prob) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> lons, lats, depths, vols, values;
  for (int i = 0; i < nlon; ++i) lons.push_back(5.0 + 10.0 * i);
  for (int i = 0; i < nlat; ++i) lats.push_back(-60.0 + 12.0 * i);
  for (int i = 0; i < ndepth; ++i) depths.push_back(50.0 + 400.0 * i);
  std::vector<std::uint8_t> mask;
  const std::size_t cells = lons.size() * lats.size() * depths.size();
  for (std::size_t c = 0; c < cells; ++c) {
    vols.push_back(0.5 + u(rng));
    const bool ok = u(rng) >= mask_prob || c == 0;
    mask.push_back(ok ? 1 : 0);
    values.push_back(ok ? 10.0 * u(rng) - 5.0 : 0.0);
  }
  return GridField(GridSpec(lons, lats, depths, vols), values, mask);
}

double total_weighted(const GridField& f) {
  double num = 0.0;
  for (std::size_t c = 0; c < f.values().size(); ++c)
    if (f.valid(c)) num += f.values()[c] * f.spec().cell_volumes()[c];
  return num;
}

}  // namespace

TEST_CASE("vectorize follows canonical order and skips masked cells") {
  const auto v = vectorize(field_2x2());
  REQUIRE(v.size() == 4);
  CHECK(v.values(0) == 1.0);
  CHECK(v.values(1) == 2.0);
  CHECK(v.values(2) == 3.0);
  CHECK(v.values(3) == 4.0);
  CHECK(v.locations[1] == GridIndex{1, 0, 0});

  const auto masked = vectorize(field_2x2({1, 0, 1, 1}));
  REQUIRE(masked.size() == 3);
  CHECK(masked.values(1) == 3.0);
}

TEST_CASE("devectorize inverts vectorize on the support") {
  const auto f = field_2x2({1, 1, 0, 1});
  const auto back = devectorize(vectorize(f), f.spec());
  CHECK(back.mask() == f.mask());
  for (std::size_t c = 0; c < 4; ++c)
    if (f.valid(c)) CHECK(back.values()[c] == f.values()[c]);
}

TEST_CASE("vectorize rejects an all-masked field") {
  CHECK_THROWS_AS(vectorize(field_2x2({0, 0, 0, 0})), ValidationError);
}

TEST_CASE("GridField validates shapes and finite values") {
  GridSpec spec({0.0, 1.0}, {0.0}, {0.0});
  CHECK_THROWS_AS(GridField(spec, {1.0}, {1, 1}), ValidationError);
  CHECK_THROWS_AS(GridField(spec, {1.0, std::nan("")}, {1, 1}), ValidationError);
  CHECK_NOTHROW(GridField(spec, {1.0, std::nan("")}, {1, 0}));
}

TEST_CASE("zonal mean of a constant field is constant") {
  GridSpec spec({0, 90, 180}, {-10, 10}, {5, 50});
  const GridField f(spec, std::vector<double>(12, 7.5), std::vector<std::uint8_t>(12, 1));
  const auto z = zonal_mean(f);
  CHECK(z.spec().nlon() == 1);
  for (double v : vectorize(z).values) CHECK(v == doctest::Approx(7.5));
}

TEST_CASE("zonal mean skips masked longitude bands") {
  GridSpec spec({0, 90, 180}, {0}, {5});
  const GridField f(spec, {1.0, 100.0, 3.0}, {1, 0, 1});
  CHECK(vectorize(zonal_mean(f)).values(0) == doctest::Approx(2.0));
}

TEST_CASE("zonal mean of a field linear in longitude is the midpoint value") {
  GridSpec spec({0, 10, 20, 30, 40}, {0}, {5});
  const GridField f(spec, {0.0, 1.0, 2.0, 3.0, 4.0}, std::vector<std::uint8_t>(5, 1));
  CHECK(vectorize(zonal_mean(f)).values(0) == doctest::Approx(2.0));
}

TEST_CASE("vertical mean weights by volume") {
  GridSpec spec({0, 10}, {0}, {5}, {1.0, 3.0});
  const GridField f(spec, {0.0, 4.0}, {1, 1});
  CHECK(vectorize(vertical_mean(f)).values(0) == doctest::Approx(3.0));
}

TEST_CASE("vertical mean masks depths with no valid cell") {
  GridSpec spec({0, 10}, {0}, {5, 50});
  const GridField f(spec, {1.0, 2.0, 0.0, 0.0}, {1, 1, 0, 0});
  const auto v = vertical_mean(f);
  CHECK(v.valid(0));
  CHECK_FALSE(v.valid(1));
}

TEST_CASE("property: aggregation preserves the weighted mean and composes") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const auto f = random_field(rng, 2 + trial % 5, 2 + trial % 4, 1 + trial % 3, 0.35);
    const double m = weighted_mean(f);
    const auto z = zonal_mean(f);
    const auto v = vertical_mean(f);
    CHECK(weighted_mean(z) == doctest::Approx(m).epsilon(1e-12));
    CHECK(weighted_mean(v) == doctest::Approx(m).epsilon(1e-12));
    CHECK(total_weighted(z) == doctest::Approx(total_weighted(f)).epsilon(1e-12));
    const auto vz = vertical_mean(z);
    const auto a = vectorize(vz).values, b = vectorize(v).values;
    REQUIRE(a.size() == b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a(i) == doctest::Approx(b(i)).epsilon(1e-12));
  }
}

TEST_CASE("property: aggregation is linear, so it commutes with pseudo-observation sums") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = random_field(rng, 4, 3, 2, 0.3);
    std::vector<double> doubled = f.values();
    for (double& x : doubled) x *= 2.0;
    const GridField g(f.spec(), doubled, f.mask());
    for (Level level : {Level::k2D, Level::k1D}) {
      const auto a = vectorize(aggregate(g, level)).values;
      const auto b = vectorize(aggregate(f, level)).values;
      CHECK((a - 2.0 * b).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + b.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("subsample positions are reproducible, sorted and distinct") {
  const auto a = subsample_positions(61051, 1300, 42);
  const auto b = subsample_positions(61051, 1300, 42);
  CHECK(a == b);
  CHECK(a.size() == 1300);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 1300);
  CHECK(subsample_positions(61051, 1300, 43) != a);
}

TEST_CASE("subsampling every cell returns the full support") {
  std::mt19937_64 rng(9);
  const auto f = random_field(rng, 4, 4, 2, 0.3);
  const auto all = vectorize(f);
  const auto sub = random_subsample(f, static_cast<std::size_t>(all.size()), 1);
  CHECK(sub.locations == all.locations);
  CHECK_THROWS_AS(random_subsample(f, static_cast<std::size_t>(all.size()) + 1, 1), ValidationError);
}
