#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pccal/emulator.hpp"
#include "pccal/pc_basis.hpp"

namespace pccal {

/// Observation projected onto K = (K_y  K_d^PC).
struct ReducedObservation {
  Eigen::VectorXd z_r;      // J_y + J_d entries: emulator block, then discrepancy block
  Eigen::MatrixXd ktk_inv;  // (K^T K)^-1
  Eigen::Index j_y = 0;
  Eigen::Index j_d = 0;
  /// Condition number of K after scaling its columns to unit norm.
  double condition_number = 1.0;

  Eigen::Index size() const { return z_r.size(); }
};

/// Least-squares projection of the observation (after subtracting the
/// ensemble column means) onto the concatenated basis, through an SVD of the
/// column-equilibrated K. Throws NumericalError naming the most collinear
/// columns when the condition number exceeds `max_condition`.
ReducedObservation reduce_observation(const Eigen::VectorXd& observation, const PcBasis& basis,
                                      const Eigen::MatrixXd& discrepancy_basis, const Eigen::VectorXd& column_means,
                                      double max_condition = 1e10);

/// Inverse-gamma log-density with density proportional to x^-(shape+1) exp(-scale/x).
double inverse_gamma_logpdf(double x, double shape, double scale);

struct PriorSpec {
  /// Uniform bounds per parameter; equal bounds hold a parameter fixed.
  Eigen::VectorXd theta_lower;
  Eigen::VectorXd theta_upper;
  double a_nu = 2.0;  // kappa_d shape
  double b_nu = 2.0;  // kappa_d scale
  double a_z = 2.0;   // sigma^2 shape
  double b_z = 2.0;   // sigma^2 scale
  double kappa_y_shape = 5.0;
  Eigen::VectorXd kappa_y_scale;

  /// Scales chosen so each sill prior has its mode at the fitted sill:
  /// mode = scale / (shape + 1).
  void anchor_sills(const Eigen::VectorXd& fitted_sills, double shape = 5.0);
  bool is_free(Eigen::Index k) const { return theta_upper(k) > theta_lower(k); }
  /// Throws ValidationError on non-positive shapes/scales or bad bounds.
  void validate(Eigen::Index parameters, Eigen::Index components) const;
};

struct CalibrationState {
  Eigen::VectorXd theta;
  double sigma2 = 1.0;
  double kappa_d = 1.0;
  Eigen::VectorXd kappa_y;
};

/// Uniform (0 inside the bounds, -inf outside) plus inverse-gamma terms for
/// sigma^2, kappa_d and every kappa_y.
double log_prior(const CalibrationState& state, const PriorSpec& priors);

/// Gaussian log-density of Z^R with mean (mu_eta, 0) and covariance
/// blockdiag(Sigma_eta, kappa_d I) + sigma^2 (K^T K)^-1. Throws
/// NumericalError if the covariance is not positive definite.
double reduced_loglik(const ReducedObservation& zr, const EmulatorPrediction& prediction, double sigma2,
                      double kappa_d);
double reduced_loglik(const ReducedObservation& zr, const PcEmulator& emulator, const CalibrationState& state);

}  // namespace pccal
