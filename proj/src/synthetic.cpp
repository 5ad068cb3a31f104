#include "pccal/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "pccal/discrepancy.hpp"
#include "pccal/errors.hpp"

namespace pccal {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

/// Smooth random surface on the sphere: a few low-order waves.
struct SmoothField {
  std::vector<std::array<double, 5>> waves;  // amplitude, lon wavenumber, lon phase, lat wavenumber, lat phase

  SmoothField(std::mt19937_64& rng, int count) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < count; ++i)
      waves.push_back({0.5 + u(rng), std::floor(1.0 + 3.0 * u(rng)), 2.0 * std::numbers::pi * u(rng),
                       1.0 + 2.0 * u(rng), 2.0 * std::numbers::pi * u(rng)});
  }

  double operator()(double lon, double lat) const {
    double v = 0.0;
    for (const auto& w : waves) v += w[0] * std::cos(w[1] * lon * kDeg + w[2]) * std::cos(w[3] * lat * kDeg + w[4]);
    return v;
  }
};

double threshold_for(std::vector<double> values, double fraction) {
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(std::clamp(1.0 - fraction, 0.0, 1.0) * static_cast<double>(values.size() - 1));
  return values[idx];
}

struct Response {
  double clim;
  double p1;
  double p2;
  double p3;
};

Response response_patterns(const Coord& c) {
  const double lat = c.lat * kDeg;
  const double lon = c.lon * kDeg;
  const double z = c.depth;
  return {2.0 + 26.0 * std::cos(lat) * std::cos(lat) * std::exp(-z / 700.0) +
              1.5 * std::cos(lon) * std::cos(lat) * std::exp(-z / 1500.0),
          4.0 * std::cos(lat) * (z / 1000.0) * std::exp(-z / 1200.0),
          2.0 * std::sin(lat) * std::exp(-z / 500.0),
          std::cos(2.0 * lat) * (1.0 - std::exp(-z / 2000.0))};
}

/// `jitter` shifts the leading pattern to mimic run-to-run internal variability.
double simulator(const Coord& c, double theta, const BenchmarkSpec& spec, double jitter) {
  const Response r = response_patterns(c);
  // each response is odd about the truth
  const double u = theta - spec.truth;
  return r.clim + spec.response_scale * ((std::tanh(u / 0.2) + jitter) * r.p1 +
                                         5.0 * u * std::exp(-(u / 0.25) * (u / 0.25)) * r.p2 +
                                         0.3 * std::sin(2.0 * std::numbers::pi * u / 0.5) * r.p3);
}

GridField evaluate(const Benchmark& bench, double theta, double jitter) {
  std::vector<double> values(bench.grid.cell_count(), 0.0);
  for (std::size_t f = 0; f < values.size(); ++f)
    if (bench.mask[f]) values[f] = simulator(bench.grid.coord(bench.grid.grid_index(f)), theta, bench.spec, jitter);
  return GridField(bench.grid, std::move(values), bench.mask);
}

}  // namespace

Benchmark make_benchmark(const BenchmarkSpec& spec) {
  if (spec.nlon < 2 || spec.nlat < 2 || spec.depths.empty() || spec.depths.size() != spec.thickness.size())
    throw ValidationError("benchmark grid is malformed");
  if (spec.runs < 3) throw ValidationError("benchmark needs at least 3 runs");
  Benchmark b;
  b.spec = spec;
  std::vector<double> lons, lats;
  const double dlon = 360.0 / spec.nlon;
  for (int i = 0; i < spec.nlon; ++i) lons.push_back(0.5 * dlon + i * dlon);
  const double dlat = 152.0 / (spec.nlat - 1);
  for (int i = 0; i < spec.nlat; ++i) lats.push_back(-76.0 + i * dlat);

  std::vector<double> volumes;
  for (double t : spec.thickness)
    for (double la : lats)
      for (std::size_t i = 0; i < lons.size(); ++i) volumes.push_back(t * std::cos(la * kDeg));
  b.grid = GridSpec(lons, lats, spec.depths, volumes);

  std::mt19937_64 rng(spec.seed);
  const SmoothField land(rng, 4);
  const SmoothField bathymetry(rng, 3);
  std::vector<double> lv, bv;
  for (double la : lats)
    for (double lo : lons) {
      lv.push_back(land(lo, la));
      bv.push_back(bathymetry(lo, la));
    }
  const double land_cut = threshold_for(lv, spec.land_fraction);
  b.mask.assign(b.grid.cell_count(), 0);
  const auto nd = spec.depths.size();
  for (std::size_t d = 0; d < nd; ++d) {
    // deeper levels lose extra cells to shallow bathymetry
    const double shelf = d + 3 > nd ? 0.04 * static_cast<double>(d + 3 - nd) : 0.0;
    const double bath_cut = shelf > 0.0 ? threshold_for(bv, shelf) : std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < lv.size(); ++h) {
      const bool ocean = lv[h] < land_cut && !(bv[h] > bath_cut);
      b.mask[d * lv.size() + h] = ocean ? 1 : 0;
    }
  }

  b.ensemble.parameter_names = {"K_bg"};
  b.ensemble.thetas.resize(spec.runs, 1);
  for (int i = 0; i < spec.runs; ++i) b.ensemble.thetas(i, 0) = spec.theta_start + i * spec.theta_step;
  std::normal_distribution<double> variability(0.0, spec.internal_variability);
  for (int i = 0; i < spec.runs; ++i) {
    const double jitter = spec.internal_variability > 0.0 ? variability(rng) : 0.0;
    b.ensemble.runs.push_back(evaluate(b, b.ensemble.thetas(i, 0), jitter));
  }
  return b;
}

GridField simulate_field(const Benchmark& bench, double theta) { return evaluate(bench, theta, 0.0); }

GridField synthetic_observation(const Benchmark& bench, std::uint64_t seed) {
  const GridField truth = simulate_field(bench, bench.spec.truth);
  const auto cells = support(truth);
  const auto coords = coordinates(bench.grid, cells);
  const DiscrepancySettings ds;
  const auto knots = make_knot_grid(bench.grid, ds.lat_step, ds.lon_step, ds.depth_step);
  const Eigen::MatrixXd K = build_kernel(coords, knots.knots, ds.phi_surface_km, ds.phi_depth_m);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd nu(K.cols());
  for (Eigen::Index j = 0; j < nu.size(); ++j) nu(j) = normal(rng);
  Eigen::VectorXd delta = K * nu;
  const double rms = std::sqrt(delta.squaredNorm() / static_cast<double>(delta.size()));
  if (rms > 0.0) delta *= bench.spec.discrepancy_sd / rms;

  std::vector<double> values = truth.values();
  for (std::size_t i = 0; i < cells.size(); ++i)
    values[bench.grid.flat_index(cells[i])] += delta(static_cast<Eigen::Index>(i)) + bench.spec.noise_sd * normal(rng);
  return GridField(bench.grid, std::move(values), bench.mask);
}

void write_benchmark(const std::filesystem::path& dir, const Benchmark& bench, const GridField& observation) {
  std::filesystem::create_directories(dir / "fields");
  EnsembleManifest manifest;
  manifest.parameter_names = bench.ensemble.parameter_names;
  manifest.thetas = bench.ensemble.thetas;
  for (std::size_t i = 0; i < bench.ensemble.runs.size(); ++i) {
    const auto path = dir / "fields" / fmt::format("run_{:03d}.csv", i);
    write_field_csv(path, bench.ensemble.runs[i]);
    manifest.field_paths.push_back(path);
  }
  write_ensemble_manifest(dir / "manifest.json", manifest);
  write_field_csv(dir / "observation.csv", observation);
}

}  // namespace pccal
