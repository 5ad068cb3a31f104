#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pccal/gp_component.hpp"
#include "pccal/pc_basis.hpp"

namespace pccal {

/// Simulator design: parameter settings and the centered output matrix.
struct EnsembleDesign {
  std::vector<std::string> parameter_names;
  Eigen::MatrixXd thetas;        // p x q
  Eigen::MatrixXd centered;      // p x n
  Eigen::VectorXd column_means;  // n

  /// Validates p >= 2, matching row counts and distinct settings, then centers.
  static EnsembleDesign from_raw(std::vector<std::string> names, Eigen::MatrixXd thetas,
                                 const Eigen::MatrixXd& outputs);

  Eigen::Index runs() const { return thetas.rows(); }
  Eigen::Index dimension() const { return centered.cols(); }
};

struct EmulatorOptions {
  BasisSelection selection = BasisSelection::by_fraction(0.9);
  GpFitOptions fit;
  int threads = 1;
};

struct EmulatorPrediction {
  Eigen::VectorXd mean;      // J_y
  Eigen::VectorXd variance;  // J_y, diagonal of Sigma_eta
  bool extrapolated = false;
};

/// Per-component correlation vectors at one parameter setting, reusable while
/// only the partial sills change.
struct EmulatorRotation {
  std::vector<Eigen::VectorXd> rotated;
  bool extrapolated = false;
};

/// Principal-component emulator: one independent zero-mean GP per retained
/// component, fitted on parameters rescaled to the design's bounding box.
class PcEmulator {
 public:
  PcEmulator() = default;
  PcEmulator(std::vector<std::string> parameter_names, PcBasis basis, Eigen::MatrixXd thetas,
             Eigen::VectorXd column_means, Eigen::MatrixXd scores, std::vector<GpHyperparams> hyper);

  /// Builds the basis, projects the ensemble and fits every component by
  /// maximum likelihood (components in parallel, seeds derived per component).
  static PcEmulator fit(const EnsembleDesign& design, const EmulatorOptions& options);

  Eigen::Index components() const { return basis_.components(); }
  Eigen::Index parameters() const { return thetas_.cols(); }
  const PcBasis& basis() const { return basis_; }
  const Eigen::MatrixXd& thetas() const { return thetas_; }
  const Eigen::MatrixXd& scores() const { return scores_; }
  const Eigen::VectorXd& column_means() const { return column_means_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const GpHyperparams& hyper(Eigen::Index j) const { return comps_[static_cast<std::size_t>(j)].hyper(); }
  const GpComponent& component(Eigen::Index j) const { return comps_[static_cast<std::size_t>(j)]; }
  std::vector<GpHyperparams> all_hyper() const;
  Eigen::VectorXd sills() const;

  /// Maps raw parameters into the unit box used by the component GPs.
  Eigen::VectorXd to_unit(const Eigen::VectorXd& theta) const;

  EmulatorRotation rotate(const Eigen::VectorXd& theta) const;
  /// `sills` (length J_y) replaces the fitted partial sills when given.
  EmulatorPrediction predict_rotated(const EmulatorRotation& rotation, const Eigen::VectorXd* sills = nullptr) const;
  EmulatorPrediction predict(const Eigen::VectorXd& theta, const Eigen::VectorXd* sills = nullptr) const;

  /// Emulated output field K_y mu(theta) + column means.
  Eigen::VectorXd predict_field(const Eigen::VectorXd& theta) const;

 private:
  std::vector<std::string> names_;
  PcBasis basis_;
  Eigen::MatrixXd thetas_;
  Eigen::VectorXd column_means_;
  Eigen::MatrixXd scores_;
  Eigen::VectorXd lower_, upper_;
  Eigen::MatrixXd unit_thetas_;
  std::vector<GpComponent> comps_;
};

}  // namespace pccal
