#include <doctest.h>

#include <cmath>
#include <limits>

#include "pccal/emulator_io.hpp"
#include "pccal/errors.hpp"
#include "pccal/gp_component.hpp"
#include "support.hpp"

using namespace pccal;

namespace {

GpHyperparams hyper(double kappa, double zeta, std::initializer_list<double> phis) {
  GpHyperparams h;
  h.kappa = kappa;
  h.zeta = zeta;
  h.phis = Eigen::Map<const Eigen::VectorXd>(phis.begin(), static_cast<Eigen::Index>(phis.size()));
  return h;
}

}  // namespace

TEST_CASE("squared-exponential covariance values") {
  const auto h = hyper(2.0, 0.5, {1.0, 2.0});
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 1.0, 0.0;
  CHECK(sq_exp_cov(a, a, h) == doctest::Approx(2.5));
  CHECK(sq_exp_cov(a, b, h) == doctest::Approx(2.0 * std::exp(-1.0)));
  b << 0.0, 2.0;
  CHECK(sq_exp_cov(a, b, h) == doctest::Approx(2.0 * std::exp(-1.0)));
  b << 1.0, 2.0;
  CHECK(sq_exp_cov(a, b, h) == doctest::Approx(2.0 * std::exp(-2.0)));
}

TEST_CASE("hyperparameter validation") {
  CHECK_NOTHROW(hyper(1.0, 0.0, {0.5}).validate());
  CHECK_NOTHROW(hyper(0.0, 1.0, {0.5}).validate());
  CHECK_THROWS_AS(hyper(0.0, 0.0, {0.5}).validate(), ValidationError);
  CHECK_THROWS_AS(hyper(-1.0, 0.1, {0.5}).validate(), ValidationError);
  CHECK_THROWS_AS(hyper(1.0, 0.1, {0.0}).validate(), ValidationError);
}

TEST_CASE("log-likelihood matches the dense Gaussian density") {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd X = testing::unit_design(15, 2, rng);
  const Eigen::VectorXd y = testing::random_matrix(15, 1, rng);
  const auto h = hyper(1.3, 0.2, {0.4, 0.7});
  Eigen::MatrixXd C(15, 15);
  for (int a = 0; a < 15; ++a)
    for (int b = 0; b < 15; ++b) C(a, b) = sq_exp_cov(X.row(a).transpose(), X.row(b).transpose(), h);
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double expect = -0.5 * (y.dot(llt.solve(y)) + logdet + 15.0 * std::log(2.0 * M_PI));
  CHECK(gp_loglik(X, y, h) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("gradient agrees with central differences") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd X = testing::unit_design(20, 3, rng);
  const Eigen::VectorXd y = testing::gp_draws(X, 1, 0.5, 0.01, rng);
  const auto h = hyper(0.8, 0.05, {0.3, 0.6, 1.1});
  Eigen::VectorXd g;
  gp_loglik_gradient(X, y, h, g);
  REQUIRE(g.size() == 5);
  const double eps = 1e-5;
  for (int k = 0; k < 5; ++k) {
    auto up = h, dn = h;
    auto bump = [&](GpHyperparams& t, double s) {
      if (k == 0) t.kappa *= std::exp(s);
      else if (k == 1) t.zeta *= std::exp(s);
      else t.phis(k - 2) *= std::exp(s);
    };
    bump(up, eps);
    bump(dn, -eps);
    const double fd = (gp_loglik(X, y, up) - gp_loglik(X, y, dn)) / (2 * eps);
    CHECK(g(k) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("maximum-likelihood fit beats the generating hyperparameters") {
  std::mt19937_64 rng(13);
  const Eigen::MatrixXd X = testing::unit_design(200, 1, rng);
  const auto truth = hyper(1.0, 0.01, {0.2});
  const Eigen::VectorXd y = testing::gp_draws(X, 1, 0.2, 0.01, rng);
  GpFitOptions opt;
  opt.seed = 3;
  GpFitDiagnostics diag;
  const auto fit = fit_component(X, y, opt, &diag);
  CHECK(diag.best_loglik >= gp_loglik(X, y, truth) - 1e-6);
  CHECK(diag.converged_starts >= 1);
  CHECK(fit.phis(0) == doctest::Approx(0.2).epsilon(0.3));
  CHECK(fit.zeta == doctest::Approx(0.01).epsilon(0.6));
}

TEST_CASE("white noise is absorbed by the nugget") {
  std::mt19937_64 rng(14);
  const Eigen::MatrixXd X = testing::unit_design(60, 2, rng);
  const Eigen::VectorXd y = testing::random_matrix(60, 1, rng);
  const auto fit = fit_component(X, y, GpFitOptions{});
  CHECK(fit.zeta > 0.5);
}

TEST_CASE("a repeated design point with different outputs forces a nugget") {
  Eigen::MatrixXd X(6, 1);
  X << 0.0, 0.2, 0.4, 0.4, 0.8, 1.0;
  Eigen::VectorXd y(6);
  y << 0.0, 0.5, 1.0, -1.0, 0.3, 0.1;
  const auto fit = fit_component(X, y, GpFitOptions{});
  CHECK(fit.zeta > 1e-3);
}

TEST_CASE("fit is reproducible per seed") {
  std::mt19937_64 rng(15);
  const Eigen::MatrixXd X = testing::unit_design(30, 2, rng);
  const Eigen::VectorXd y = testing::gp_draws(X, 1, 0.5, 1e-4, rng);
  GpFitOptions opt;
  opt.seed = 77;
  const auto a = fit_component(X, y, opt), b = fit_component(X, y, opt);
  CHECK(a.kappa == b.kappa);
  CHECK(a.zeta == b.zeta);
  CHECK(a.phis == b.phis);
}

TEST_CASE("predictions interpolate with a tiny nugget and revert far away") {
  std::mt19937_64 rng(16);
  const Eigen::MatrixXd X = testing::unit_design(12, 1, rng);
  const Eigen::VectorXd y = testing::random_matrix(12, 1, rng);
  const GpComponent gp(X, y, hyper(1.0, 1e-12, {0.25}));
  for (int i = 0; i < 12; ++i) {
    const auto p = gp.predict(X.row(i).transpose());
    CHECK(p.mean == doctest::Approx(y(i)).epsilon(1e-4));
    CHECK(p.variance <= 1e-6);
  }
  const auto far = gp.predict(Eigen::VectorXd::Constant(1, 50.0));
  CHECK(std::abs(far.mean) <= 1e-12);
  CHECK(far.variance == doctest::Approx(1.0));
}

TEST_CASE("prediction equals the brute-force Gaussian conditional") {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd X = testing::unit_design(10, 2, rng);
  const Eigen::VectorXd y = testing::random_matrix(10, 1, rng);
  const auto h = hyper(1.7, 0.1, {0.5, 0.9});
  const GpComponent gp(X, y, h);
  Eigen::MatrixXd C(10, 10);
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b) C(a, b) = sq_exp_cov(X.row(a).transpose(), X.row(b).transpose(), h);
  Eigen::VectorXd xs(2);
  xs << 0.37, 0.61;
  Eigen::VectorXd c(10);
  for (int a = 0; a < 10; ++a) c(a) = h.kappa * std::exp(-((X(a, 0) - xs(0)) * (X(a, 0) - xs(0)) / 0.25 +
                                                           (X(a, 1) - xs(1)) * (X(a, 1) - xs(1)) / 0.81));
  const Eigen::VectorXd w = C.ldlt().solve(c);
  const auto p = gp.predict(xs);
  CHECK(p.mean == doctest::Approx(w.dot(y)).epsilon(1e-10));
  CHECK(p.variance == doctest::Approx(h.kappa + h.zeta - w.dot(c)).epsilon(1e-10));

  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  gp.predict_joint(xs.transpose(), mean, cov);
  CHECK(mean(0) == doctest::Approx(p.mean).epsilon(1e-10));
  CHECK(cov(0, 0) == doctest::Approx(p.variance).epsilon(1e-10));
}

TEST_CASE("replacing the partial sill matches refitting with that sill") {
  std::mt19937_64 rng(18);
  const Eigen::MatrixXd X = testing::unit_design(14, 2, rng);
  const Eigen::VectorXd y = testing::random_matrix(14, 1, rng);
  const GpComponent base(X, y, hyper(1.0, 0.05, {0.4, 0.4}));
  const GpComponent other(X, y, hyper(3.5, 0.05, {0.4, 0.4}));
  Eigen::VectorXd xs(2);
  xs << 0.2, 0.9;
  const auto a = base.predict_rotated(base.rotate(xs), 3.5);
  const auto b = other.predict(xs);
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-10));
  CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-10));
}

TEST_CASE("emulator fits, predicts at design points and round-trips through disk") {
  const auto ens = testing::gp_ensemble(25, 2, 40, 4, 21);
  EmulatorOptions opt;
  opt.selection = BasisSelection::by_count(3);
  opt.fit.seed = 5;
  const auto em = PcEmulator::fit(ens.design, opt);
  CHECK(em.components() == 3);
  CHECK(em.parameters() == 2);
  for (int i = 0; i < 25; i += 6) {
    const auto p = em.predict(ens.thetas.row(i).transpose());
    CHECK((p.mean - em.scores().row(i).transpose()).norm() <= 0.05 * em.scores().row(i).norm() + 1e-3);
    CHECK(!p.extrapolated);
  }
  CHECK(em.predict(Eigen::Vector2d(5.0, 0.5)).extrapolated);

  const auto dir = testing::scratch_dir("emulator");
  save_emulator(dir, em);
  const auto back = load_emulator(dir);
  Eigen::VectorXd t(2);
  t << 0.31, 0.77;
  const auto a = em.predict(t), b = back.predict(t);
  CHECK((a.mean - b.mean).norm() == doctest::Approx(0.0));
  CHECK((a.variance - b.variance).norm() == doctest::Approx(0.0));
  CHECK(back.parameter_names() == em.parameter_names());
  std::filesystem::remove(dir / "scores.csv");
  CHECK_THROWS_AS(load_emulator(dir), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("emulator fit is identical across thread counts") {
  const auto ens = testing::gp_ensemble(20, 1, 30, 3, 22);
  EmulatorOptions opt;
  opt.selection = BasisSelection::by_count(3);
  opt.threads = 1;
  const auto a = PcEmulator::fit(ens.design, opt);
  opt.threads = 3;
  const auto b = PcEmulator::fit(ens.design, opt);
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(a.hyper(j).kappa == b.hyper(j).kappa);
    CHECK(a.hyper(j).phis == b.hyper(j).phis);
  }
}

TEST_CASE("design validation") {
  Eigen::MatrixXd t(2, 1), out(2, 3);
  t << 0.1, 0.1;
  out.setRandom();
  CHECK_THROWS_AS(EnsembleDesign::from_raw({"a"}, t, out), ValidationError);
  CHECK_THROWS_AS(EnsembleDesign::from_raw({"a"}, Eigen::MatrixXd::Zero(1, 1), out.topRows(1)), ValidationError);
  t << 0.1, 0.2;
  CHECK_THROWS_AS(EnsembleDesign::from_raw({"a"}, t, out.topRows(1)), ValidationError);
}
