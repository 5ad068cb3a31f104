// Writes the synthetic benchmark ensemble and observation used by the examples.
#include <iostream>

#include <CLI11.hpp>

#include "pccal/errors.hpp"
#include "pccal/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic ocean benchmark"};
  std::string out;
  pccal::BenchmarkSpec spec;
  std::uint64_t obs_seed = 7;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--runs", spec.runs, "ensemble size")->check(CLI::Range(2, 100000));
  app.add_option("--seed", spec.seed, "benchmark seed");
  app.add_option("--obs-seed", obs_seed, "observation noise seed");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto bench = pccal::make_benchmark(spec);
    pccal::write_benchmark(out, bench, pccal::synthetic_observation(bench, obs_seed));
  } catch (const pccal::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return 0;
}
