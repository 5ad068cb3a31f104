#include "pccal/pc_basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "pccal/errors.hpp"

namespace pccal {

CenteredMatrix center_columns(const Eigen::MatrixXd& raw) {
  if (raw.rows() < 2) throw ValidationError("centering needs at least two rows");
  CenteredMatrix out;
  out.column_means = raw.colwise().mean().transpose();
  out.centered = raw.rowwise() - out.column_means.transpose();
  return out;
}

Eigen::Index components_for_fraction(const Eigen::VectorXd& eigenvalues, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ValidationError(fmt::format("explained-variance fraction {} is outside (0, 1]", fraction));
  const double total = eigenvalues.sum();
  if (!(total > 0.0)) throw ValidationError("cannot select components of a zero matrix");
  double running = 0.0;
  for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
    running += eigenvalues(j);
    // relative slack so fraction = 1 selects the full rank despite round-off
    if (running >= fraction * total * (1.0 - 1e-12)) return j + 1;
  }
  return eigenvalues.size();
}

PcBasis build_basis(const Eigen::MatrixXd& centered, const BasisSelection& selection) {
  const Eigen::Index p = centered.rows();
  if (p < 2) throw ValidationError("basis construction needs at least two ensemble members");
  if (selection.fraction.has_value() == selection.count.has_value())
    throw ValidationError("basis selection needs exactly one of a fraction or a component count");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = s.size() > 0 ? s(0) * static_cast<double>(std::max(centered.rows(), centered.cols())) *
                                        std::numeric_limits<double>::epsilon()
                                  : 0.0;
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;
  if (rank == 0) throw ValidationError("ensemble matrix has rank zero");

  PcBasis basis;
  basis.all_eigenvalues = s.head(rank).array().square() / static_cast<double>(p - 1);

  Eigen::Index J = 0;
  if (selection.count) {
    J = *selection.count;
    if (J < 1 || J > rank)
      throw ValidationError(fmt::format("requested {} components but the ensemble matrix has rank {}", J, rank));
  } else {
    J = components_for_fraction(basis.all_eigenvalues, *selection.fraction);
  }

  basis.eigenvalues = basis.all_eigenvalues.head(J);
  basis.explained_fraction = basis.eigenvalues.sum() / basis.all_eigenvalues.sum();
  basis.K.resize(centered.cols(), J);
  for (Eigen::Index j = 0; j < J; ++j) {
    Eigen::VectorXd e = svd.matrixV().col(j);
    // sign convention: largest-magnitude entry positive
    Eigen::Index arg = 0;
    e.cwiseAbs().maxCoeff(&arg);
    if (e(arg) < 0) e = -e;
    basis.K.col(j) = std::sqrt(basis.eigenvalues(j)) * e;
  }
  return basis;
}

Eigen::VectorXd project(const PcBasis& basis, const Eigen::VectorXd& y) {
  if (y.size() != basis.dimension())
    throw ValidationError(fmt::format("cannot project a vector of length {} onto a basis of dimension {}",
                                      y.size(), basis.dimension()));
  return (basis.K.transpose() * y).cwiseQuotient(basis.eigenvalues);
}

Eigen::MatrixXd project_rows(const PcBasis& basis, const Eigen::MatrixXd& centered) {
  if (centered.cols() != basis.dimension())
    throw ValidationError("ensemble matrix width does not match the basis dimension");
  Eigen::MatrixXd scores = centered * basis.K;
  return scores * basis.eigenvalues.cwiseInverse().asDiagonal();
}

Eigen::VectorXd reconstruct(const PcBasis& basis, const Eigen::VectorXd& scores,
                            const Eigen::VectorXd& column_means) {
  if (scores.size() != basis.components() || column_means.size() != basis.dimension())
    throw ValidationError("reconstruction inputs do not match the basis");
  return basis.K * scores + column_means;
}

}  // namespace pccal
