#include "pccal/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "pccal/errors.hpp"

namespace pccal {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

ReducedObservation reduce_observation(const Eigen::VectorXd& observation, const PcBasis& basis,
                                      const Eigen::MatrixXd& discrepancy_basis, const Eigen::VectorXd& column_means,
                                      double max_condition) {
  const Eigen::Index n = basis.dimension();
  if (observation.size() != n || column_means.size() != n)
    throw ValidationError(fmt::format("observation of length {} does not match the basis dimension {}",
                                      observation.size(), n));
  if (discrepancy_basis.cols() > 0 && discrepancy_basis.rows() != n)
    throw ValidationError("discrepancy basis rows do not match the observation length");

  ReducedObservation out;
  out.j_y = basis.components();
  out.j_d = discrepancy_basis.cols();
  const Eigen::Index J = out.j_y + out.j_d;
  if (J > n) throw ValidationError(fmt::format("{} basis columns exceed {} observations", J, n));

  Eigen::MatrixXd K(n, J);
  K.leftCols(out.j_y) = basis.K;
  if (out.j_d > 0) K.rightCols(out.j_d) = discrepancy_basis;
  const Eigen::VectorXd norms = K.colwise().norm().transpose();
  if ((norms.array() <= 0.0).any()) throw NumericalError("basis contains a zero column");
  const Eigen::MatrixXd Ks = K * norms.cwiseInverse().asDiagonal();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(Ks, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  out.condition_number = s(0) / s(J - 1);
  if (!(out.condition_number <= max_condition)) {
    // the weakest right singular vector shows which columns are nearly dependent
    const Eigen::VectorXd v = svd.matrixV().col(J - 1).cwiseAbs();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(J));
    for (Eigen::Index j = 0; j < J; ++j) order[static_cast<std::size_t>(j)] = j;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v(a) > v(b); });
    auto label = [&](Eigen::Index j) {
      return j < out.j_y ? fmt::format("K_y[{}]", j) : fmt::format("K_d[{}]", j - out.j_y);
    };
    throw NumericalError(fmt::format("emulator and discrepancy bases are nearly collinear (condition number {:.3g}); "
                                     "most involved columns: {}, {}",
                                     out.condition_number, label(order[0]), label(order[std::min<std::size_t>(1, order.size() - 1)])));
  }

  const Eigen::VectorXd centered = observation - column_means;
  const Eigen::MatrixXd Vs = svd.matrixV() * s.cwiseInverse().asDiagonal();
  out.z_r = norms.cwiseInverse().asDiagonal() * (Vs * (svd.matrixU().transpose() * centered));
  const Eigen::MatrixXd half = norms.cwiseInverse().asDiagonal() * Vs;
  out.ktk_inv = half * half.transpose();
  out.ktk_inv = 0.5 * (out.ktk_inv + out.ktk_inv.transpose()).eval();
  return out;
}

double inverse_gamma_logpdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

void PriorSpec::anchor_sills(const Eigen::VectorXd& fitted_sills, double shape) {
  kappa_y_shape = shape;
  kappa_y_scale = (shape + 1.0) * fitted_sills;
}

void PriorSpec::validate(Eigen::Index parameters, Eigen::Index components) const {
  if (theta_lower.size() != parameters || theta_upper.size() != parameters)
    throw ValidationError(fmt::format("prior bounds given for {} parameters, expected {}", theta_lower.size(), parameters));
  for (Eigen::Index k = 0; k < parameters; ++k)
    if (!std::isfinite(theta_lower(k)) || !std::isfinite(theta_upper(k)) || theta_upper(k) < theta_lower(k))
      throw ValidationError(fmt::format("prior bounds for parameter {} are not a finite nonempty range", k));
  for (double v : {a_nu, b_nu, a_z, b_z, kappa_y_shape})
    if (!(v > 0.0)) throw ValidationError("inverse-gamma shapes and scales must be positive");
  if (kappa_y_scale.size() != components)
    throw ValidationError(fmt::format("{} sill prior scales for {} components", kappa_y_scale.size(), components));
  if ((kappa_y_scale.array() <= 0.0).any()) throw ValidationError("sill prior scales must be positive");
}

double log_prior(const CalibrationState& state, const PriorSpec& priors) {
  const double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < state.theta.size(); ++k)
    if (state.theta(k) < priors.theta_lower(k) || state.theta(k) > priors.theta_upper(k)) return -inf;
  double lp = inverse_gamma_logpdf(state.sigma2, priors.a_z, priors.b_z) +
              inverse_gamma_logpdf(state.kappa_d, priors.a_nu, priors.b_nu);
  for (Eigen::Index j = 0; j < state.kappa_y.size(); ++j)
    lp += inverse_gamma_logpdf(state.kappa_y(j), priors.kappa_y_shape, priors.kappa_y_scale(j));
  return lp;
}

double reduced_loglik(const ReducedObservation& zr, const EmulatorPrediction& prediction, double sigma2,
                      double kappa_d) {
  if (!(sigma2 > 0.0) || !(kappa_d > 0.0)) throw ValidationError("variances must be positive");
  if (prediction.mean.size() != zr.j_y) throw ValidationError("emulator prediction does not match the reduced data");
  const Eigen::Index J = zr.size();
  Eigen::MatrixXd cov = sigma2 * zr.ktk_inv;
  cov.diagonal().head(zr.j_y) += prediction.variance;
  cov.diagonal().tail(zr.j_d).array() += kappa_d;
  Eigen::VectorXd resid = zr.z_r;
  resid.head(zr.j_y) -= prediction.mean;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("reduced covariance is not positive definite");
  const Eigen::VectorXd w = llt.matrixL().solve(resid);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * w.squaredNorm() - 0.5 * logdet - 0.5 * static_cast<double>(J) * kLog2Pi;
}

double reduced_loglik(const ReducedObservation& zr, const PcEmulator& emulator, const CalibrationState& state) {
  const auto pred = emulator.predict_rotated(emulator.rotate(state.theta), &state.kappa_y);
  return reduced_loglik(zr, pred, state.sigma2, state.kappa_d);
}

}  // namespace pccal
