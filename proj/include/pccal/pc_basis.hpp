#pragma once

#include <optional>

#include <Eigen/Dense>

namespace pccal {

struct CenteredMatrix {
  Eigen::MatrixXd centered;      // p x n, every column sums to zero
  Eigen::VectorXd column_means;  // length n
};

/// Subtracts column means. Requires at least two rows.
CenteredMatrix center_columns(const Eigen::MatrixXd& raw);

/// Scaled principal-component basis of a centered p x n ensemble matrix.
///
/// Column j of `K` is sqrt(lambda_j) e_j, where lambda_j is the j-th
/// eigenvalue of the sample covariance M^T M / (p - 1) and e_j its unit
/// eigenvector, so K^T K = diag(lambda) and ensemble scores have unit
/// sample variance.
struct PcBasis {
  Eigen::MatrixXd K;                // n x J
  Eigen::VectorXd eigenvalues;      // J, descending
  Eigen::VectorXd all_eigenvalues;  // every nonzero eigenvalue (rank of M)
  double explained_fraction = 0.0;

  Eigen::Index components() const { return K.cols(); }
  Eigen::Index dimension() const { return K.rows(); }
};

/// Either a target explained-variance fraction in (0, 1] or an explicit count.
struct BasisSelection {
  std::optional<double> fraction;
  std::optional<Eigen::Index> count;

  static BasisSelection by_fraction(double f) { return {f, std::nullopt}; }
  static BasisSelection by_count(Eigen::Index j) { return {std::nullopt, j}; }
};

/// Smallest J with sum_{i<=J} lambda_i / sum lambda_i >= fraction.
Eigen::Index components_for_fraction(const Eigen::VectorXd& eigenvalues, double fraction);

/// Throws ValidationError if the selection asks for more components than
/// rank(M) or the fraction is outside (0, 1].
PcBasis build_basis(const Eigen::MatrixXd& centered, const BasisSelection& selection);

/// Least-squares coordinates of a centered vector: diag(1/lambda) K^T y.
Eigen::VectorXd project(const PcBasis& basis, const Eigen::VectorXd& y);

/// Row i holds the scores of row i of `centered` (p x J).
Eigen::MatrixXd project_rows(const PcBasis& basis, const Eigen::MatrixXd& centered);

/// K scores + column_means.
Eigen::VectorXd reconstruct(const PcBasis& basis, const Eigen::VectorXd& scores,
                            const Eigen::VectorXd& column_means);

}  // namespace pccal
