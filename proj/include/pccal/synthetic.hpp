#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pccal/field_grid.hpp"
#include "pccal/field_io.hpp"

namespace pccal {

/// Desk-scale ocean-like benchmark: a global lon x lat x depth grid with
/// continents, one scalar parameter and a smooth temperature-like simulator.
struct BenchmarkSpec {
  int nlon = 20;
  int nlat = 20;
  std::vector<double> depths = {50.0, 300.0, 800.0, 1600.0, 2800.0};
  std::vector<double> thickness = {100.0, 400.0, 600.0, 1000.0, 1400.0};
  double land_fraction = 0.36;
  int runs = 50;
  double theta_start = 0.05;
  double theta_step = 0.01;
  double truth = 0.2;
  /// multiplies the parameter-dependent part of the response
  double response_scale = 10.0;
  /// sd of the per-run shift of the leading response pattern
  double internal_variability = 0.1;
  double noise_sd = 0.3;
  double discrepancy_sd = 0.3;
  std::uint64_t seed = 20240601;
};

struct Benchmark {
  BenchmarkSpec spec;
  GridSpec grid;
  std::vector<std::uint8_t> mask;
  EnsembleFields ensemble;  // parameter "K_bg"
};

Benchmark make_benchmark(const BenchmarkSpec& spec = {});

/// Simulator output at one parameter value without internal variability.
GridField simulate_field(const Benchmark& bench, double theta);

/// Simulator output at the truth plus a smooth kernel-convolution
/// discrepancy and iid noise, both drawn from `seed`.
GridField synthetic_observation(const Benchmark& bench, std::uint64_t seed);

/// Writes fields/run_XXX.csv, manifest.json and observation.csv under `dir`.
void write_benchmark(const std::filesystem::path& dir, const Benchmark& bench, const GridField& observation);

}  // namespace pccal
