#include <doctest.h>

#include <fstream>

#include "pccal/density.hpp"
#include "pccal/errors.hpp"
#include "pccal/mcmc.hpp"
#include "support.hpp"

using namespace pccal;

namespace {

struct Problem {
  PcEmulator emulator;
  ReducedObservation zr;
  PriorSpec priors;
};

Problem problem() {
  static const Problem cached = [] {
    const auto ens = testing::gp_ensemble(15, 2, 30, 2, 51);
    EmulatorOptions opt;
    opt.selection = BasisSelection::by_count(2);
    Problem p;
    p.emulator = PcEmulator::fit(ens.design, opt);
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd kd = testing::random_matrix(30, 2, rng);
    p.zr = reduce_observation(ens.outputs.row(4).transpose(), p.emulator.basis(), kd, p.emulator.column_means());
    p.priors.theta_lower = Eigen::Vector2d(0.0, 0.0);
    p.priors.theta_upper = Eigen::Vector2d(1.0, 1.0);
    p.priors.anchor_sills(p.emulator.sills());
    return p;
  }();
  return cached;
}

McmcConfig short_config(std::uint64_t seed) {
  McmcConfig c;
  c.iterations = 1500;
  c.seed = seed;
  c.warmup_window = 500;
  return c;
}

}  // namespace

TEST_CASE("Metropolis acceptance is certain for non-negative ratios") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) CHECK(metropolis_accept(0.0, rng));
  int accepted = 0;
  for (int i = 0; i < 20000; ++i) accepted += metropolis_accept(std::log(0.25), rng);
  CHECK(accepted / 20000.0 == doctest::Approx(0.25).epsilon(0.05));
  CHECK(!metropolis_accept(-std::numeric_limits<double>::infinity(), rng));
}

TEST_CASE("flat target accepts every random-walk proposal") {
  std::mt19937_64 rng(2);
  const auto draws = sample_random_walk([](double) { return 0.0; }, 0.0, 1.0, 200, 1, 9);
  for (std::size_t i = 1; i < draws.size(); ++i) CHECK(draws[i] != draws[i - 1]);
}

TEST_CASE("adaptive scale moves toward the target rate and freezes after burn-in") {
  AdaptiveScale low(1.0, 0.44, 10), high(1.0, 0.44, 10);
  for (int i = 0; i < 100; ++i) {
    low.record(false, true);
    high.record(true, true);
  }
  CHECK(low.scale() < 1.0);
  CHECK(high.scale() > 1.0);
  const double frozen = high.scale();
  for (int i = 0; i < 100; ++i) high.record(true, false);
  CHECK(high.scale() == frozen);
  CHECK(high.acceptance_rate() == 1.0);
}

TEST_CASE("configuration validation") {
  McmcConfig c;
  c.iterations = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = McmcConfig{};
  c.burn_in_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = McmcConfig{};
  c.scales.theta = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_NOTHROW(McmcConfig{}.validate());
}

TEST_CASE("chain is reproducible per seed and differs across seeds") {
  const auto p = problem();
  const auto a = run_mcmc(p.zr, p.emulator, p.priors, short_config(5));
  const auto b = run_mcmc(p.zr, p.emulator, p.priors, short_config(5));
  const auto c = run_mcmc(p.zr, p.emulator, p.priors, short_config(6));
  CHECK(a.samples == b.samples);
  CHECK(a.log_post == b.log_post);
  CHECK(a.samples != c.samples);
  CHECK(a.burn_in == 300);
  CHECK(a.iterations() == 1500);
}

TEST_CASE("chain stays inside the prior support and reports block rates") {
  const auto p = problem();
  const auto chain = run_mcmc(p.zr, p.emulator, p.priors, short_config(7));
  for (Eigen::Index i = 0; i < chain.samples.rows(); ++i) {
    CHECK(chain.samples(i, 0) >= 0.0);
    CHECK(chain.samples(i, 0) <= 1.0);
    CHECK(chain.samples.row(i).tail(4).minCoeff() > 0.0);
  }
  REQUIRE(chain.blocks.size() == 4);
  for (const auto& b : chain.blocks) {
    CHECK(b.proposed == 1500);
    CHECK(b.rate() > 0.0);
    CHECK(b.rate() < 1.0);
  }
}

TEST_CASE("fixed parameters and frozen sills stay put") {
  auto p = problem();
  p.priors.theta_lower(1) = p.priors.theta_upper(1) = 0.3;
  auto cfg = short_config(8);
  cfg.sample_kappa_y = false;
  const auto chain = run_mcmc(p.zr, p.emulator, p.priors, cfg);
  CHECK((chain.samples.col(1).array() == 0.3).all());
  CHECK((chain.samples.col(4).array() == p.emulator.sills()(0)).all());
  CHECK(chain.blocks[3].proposed == 0);
}

TEST_CASE("chain CSV has named columns and one row per iteration") {
  const auto p = problem();
  auto cfg = short_config(9);
  cfg.iterations = 50;
  const auto chain = run_mcmc(p.zr, p.emulator, p.priors, cfg);
  const auto dir = testing::scratch_dir("chain");
  write_chain_csv(dir / "chain.csv", chain);
  std::ifstream in(dir / "chain.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "theta.t0,theta.t1,sigma2,kappa_d,kappa_y.1,kappa_y.2,log_post,accepted.theta,accepted.sigma2,"
        "accepted.kappa_d,accepted.kappa_y");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 50);
  std::filesystem::remove_all(dir);
  CHECK(chain.column_index("t1") == 1);
  CHECK(chain.column_index("kappa_y.2") == 5);
  CHECK_THROWS_AS(chain.column_index("nope"), ValidationError);
}

TEST_CASE("split-half summaries cover every column") {
  const auto p = problem();
  const auto chain = run_mcmc(p.zr, p.emulator, p.priors, short_config(10));
  const auto s = split_half(chain);
  REQUIRE(s.size() == 6);
  const auto d = chain.draws("sigma2");
  CHECK(s[2].parameter == "sigma2");
  CHECK(s[2].full_mean == doctest::Approx(sample_mean(d)));
  CHECK(s[2].early_lower <= s[2].early_upper);
  CHECK_THROWS_AS(split_half(chain, 1.0), ValidationError);
}

TEST_CASE("an initial state outside the prior is rejected") {
  const auto p = problem();
  auto cfg = short_config(11);
  cfg.initial = CalibrationState{Eigen::Vector2d(2.0, 0.5), 1.0, 1.0, p.emulator.sills()};
  CHECK_THROWS_AS(run_mcmc(p.zr, p.emulator, p.priors, cfg), ValidationError);
}
