#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace pccal {

/// Squared-exponential covariance parameters for one principal component:
/// partial sill kappa, nugget zeta and one range per parameter dimension.
struct GpHyperparams {
  double kappa = 1.0;
  double zeta = 0.0;
  Eigen::VectorXd phis;

  /// Throws ValidationError unless kappa, zeta >= 0, kappa + zeta > 0, phis > 0.
  void validate() const;
};

/// kappa * exp(-sum_i (a_i - b_i)^2 / phi_i^2) + zeta * 1(a == b).
double sq_exp_cov(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyperparams& hyper);

/// Correlation part exp(-sum_i (x_ki - x_li)^2 / phi_i^2) for rows of X.
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& phis);
Eigen::VectorXd correlation_vector(const Eigen::MatrixXd& X, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& phis);

/// Zero-mean Gaussian log-likelihood of y under covariance kappa R + zeta I.
/// Returns -inf when the covariance is not numerically positive definite.
double gp_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyperparams& hyper);

/// Log-likelihood and its gradient with respect to
/// (log kappa, log zeta, log phi_1, ..., log phi_q).
double gp_loglik_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyperparams& hyper,
                          Eigen::VectorXd& gradient);

struct GpFitOptions {
  int restarts = 8;
  std::uint64_t seed = 1;
  /// nugget floor relative to the sample variance of the scores
  double min_relative_nugget = 1e-8;
  int max_iterations = 200;
};

struct GpFitDiagnostics {
  double best_loglik = 0.0;
  int converged_starts = 0;
  int evaluations = 0;
};

/// Maximum-likelihood hyperparameters for one score column over design rows
/// X (coordinates already rescaled to the unit box). Multi-start BFGS over
/// log-parameters inside a bounded box; starts come from a seeded Latin
/// hypercube. Throws NumericalError if no start converges.
GpHyperparams fit_component(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpFitOptions& options,
                            GpFitDiagnostics* diagnostics = nullptr);

struct PointPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// One fitted component with the eigendecomposition R = Q diag(r) Q^T of its
/// design correlation matrix cached, so the partial sill can be replaced at
/// prediction time without refactorizing: (kappa' R + zeta I)^-1 =
/// Q diag(1 / (kappa' r + zeta)) Q^T.
class GpComponent {
 public:
  GpComponent() = default;
  /// Throws NumericalError if kappa R + zeta I is singular.
  GpComponent(Eigen::MatrixXd X, Eigen::VectorXd y, GpHyperparams hyper);

  const GpHyperparams& hyper() const { return hyper_; }
  const Eigen::MatrixXd& design() const { return X_; }
  const Eigen::VectorXd& scores() const { return y_; }

  /// Q^T r(x*): the only O(p^2) part of a prediction.
  Eigen::VectorXd rotate(const Eigen::VectorXd& x_star) const;

  /// Predictive mean and variance from a rotated correlation vector, with the
  /// partial sill set to `kappa`. Variance includes the nugget; negative
  /// round-off is clamped to zero.
  PointPrediction predict_rotated(const Eigen::VectorXd& rotated, double kappa) const;
  PointPrediction predict(const Eigen::VectorXd& x_star) const {
    return predict_rotated(rotate(x_star), hyper_.kappa);
  }

  /// Joint predictive mean and covariance (nugget on the diagonal) at the rows of Xs.
  void predict_joint(const Eigen::MatrixXd& Xs, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) const;

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  GpHyperparams hyper_;
  Eigen::MatrixXd Q_;
  Eigen::VectorXd r_;
  Eigen::VectorXd yq_;
};

}  // namespace pccal
