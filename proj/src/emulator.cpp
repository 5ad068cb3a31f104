#include "pccal/emulator.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pccal/errors.hpp"
#include "pccal/parallel.hpp"

namespace pccal {

EnsembleDesign EnsembleDesign::from_raw(std::vector<std::string> names, Eigen::MatrixXd thetas,
                                        const Eigen::MatrixXd& outputs) {
  if (thetas.rows() < 2) throw ValidationError("an ensemble design needs at least two runs");
  if (outputs.rows() != thetas.rows())
    throw ValidationError(fmt::format("{} parameter settings but {} output rows", thetas.rows(), outputs.rows()));
  if (static_cast<Eigen::Index>(names.size()) != thetas.cols())
    throw ValidationError("parameter name count does not match the design width");
  for (Eigen::Index i = 0; i < thetas.rows(); ++i)
    for (Eigen::Index k = 0; k < i; ++k)
      if (thetas.row(i) == thetas.row(k))
        throw ValidationError(fmt::format("design points {} and {} coincide", k, i));
  if (!outputs.allFinite()) throw ValidationError("ensemble outputs contain non-finite values");
  auto c = center_columns(outputs);
  EnsembleDesign d;
  d.parameter_names = std::move(names);
  d.thetas = std::move(thetas);
  d.centered = std::move(c.centered);
  d.column_means = std::move(c.column_means);
  return d;
}

PcEmulator::PcEmulator(std::vector<std::string> parameter_names, PcBasis basis, Eigen::MatrixXd thetas,
                       Eigen::VectorXd column_means, Eigen::MatrixXd scores, std::vector<GpHyperparams> hyper)
    : names_(std::move(parameter_names)),
      basis_(std::move(basis)),
      thetas_(std::move(thetas)),
      column_means_(std::move(column_means)),
      scores_(std::move(scores)) {
  const Eigen::Index J = basis_.components();
  if (static_cast<Eigen::Index>(hyper.size()) != J || scores_.cols() != J || scores_.rows() != thetas_.rows())
    throw ValidationError("emulator components, scores and hyperparameters disagree in size");
  if (column_means_.size() != basis_.dimension()) throw ValidationError("column means do not match the basis");
  lower_ = thetas_.colwise().minCoeff().transpose();
  upper_ = thetas_.colwise().maxCoeff().transpose();
  unit_thetas_.resize(thetas_.rows(), thetas_.cols());
  for (Eigen::Index i = 0; i < thetas_.rows(); ++i) unit_thetas_.row(i) = to_unit(thetas_.row(i).transpose());
  comps_.reserve(static_cast<std::size_t>(J));
  for (Eigen::Index j = 0; j < J; ++j)
    comps_.emplace_back(unit_thetas_, scores_.col(j), std::move(hyper[static_cast<std::size_t>(j)]));
}

PcEmulator PcEmulator::fit(const EnsembleDesign& design, const EmulatorOptions& options) {
  PcBasis basis = build_basis(design.centered, options.selection);
  Eigen::MatrixXd scores = project_rows(basis, design.centered);
  const Eigen::Index J = basis.components();
  spdlog::info("basis: {} components explain {:.4f} of the variance", J, basis.explained_fraction);

  const Eigen::VectorXd lo = design.thetas.colwise().minCoeff().transpose();
  const Eigen::VectorXd hi = design.thetas.colwise().maxCoeff().transpose();
  Eigen::MatrixXd unit(design.thetas.rows(), design.thetas.cols());
  for (Eigen::Index k = 0; k < unit.cols(); ++k) {
    const double w = hi(k) > lo(k) ? hi(k) - lo(k) : 1.0;
    unit.col(k) = (design.thetas.col(k).array() - lo(k)) / w;
  }

  std::vector<GpHyperparams> hyper(static_cast<std::size_t>(J));
  parallel_for(static_cast<std::size_t>(J), options.threads, [&](std::size_t j) {
    GpFitOptions fo = options.fit;
    fo.seed = options.fit.seed + 7919ULL * j;
    GpFitDiagnostics diag;
    hyper[j] = fit_component(unit, scores.col(static_cast<Eigen::Index>(j)), fo, &diag);
    spdlog::debug("component {}: loglik {:.6g}, kappa {:.4g}, zeta {:.4g} ({} evaluations)", j, diag.best_loglik,
                  hyper[j].kappa, hyper[j].zeta, diag.evaluations);
  });
  return PcEmulator(design.parameter_names, std::move(basis), design.thetas, design.column_means,
                    std::move(scores), std::move(hyper));
}

std::vector<GpHyperparams> PcEmulator::all_hyper() const {
  std::vector<GpHyperparams> out;
  out.reserve(comps_.size());
  for (const auto& c : comps_) out.push_back(c.hyper());
  return out;
}

Eigen::VectorXd PcEmulator::sills() const {
  Eigen::VectorXd out(components());
  for (Eigen::Index j = 0; j < components(); ++j) out(j) = hyper(j).kappa;
  return out;
}

Eigen::VectorXd PcEmulator::to_unit(const Eigen::VectorXd& theta) const {
  if (theta.size() != thetas_.cols())
    throw ValidationError(fmt::format("parameter vector has length {}, expected {}", theta.size(), thetas_.cols()));
  Eigen::VectorXd u(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double w = upper_(k) > lower_(k) ? upper_(k) - lower_(k) : 1.0;
    u(k) = (theta(k) - lower_(k)) / w;
  }
  return u;
}

EmulatorRotation PcEmulator::rotate(const Eigen::VectorXd& theta) const {
  EmulatorRotation rot;
  const Eigen::VectorXd u = to_unit(theta);
  rot.extrapolated = (u.array() < -1e-12).any() || (u.array() > 1.0 + 1e-12).any();
  rot.rotated.reserve(comps_.size());
  for (const auto& c : comps_) rot.rotated.push_back(c.rotate(u));
  return rot;
}

EmulatorPrediction PcEmulator::predict_rotated(const EmulatorRotation& rotation, const Eigen::VectorXd* sills) const {
  const Eigen::Index J = components();
  if (sills && sills->size() != J)
    throw ValidationError(fmt::format("{} sill overrides for {} components", sills->size(), J));
  EmulatorPrediction out;
  out.mean.resize(J);
  out.variance.resize(J);
  out.extrapolated = rotation.extrapolated;
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto& c = comps_[static_cast<std::size_t>(j)];
    const auto p = c.predict_rotated(rotation.rotated[static_cast<std::size_t>(j)], sills ? (*sills)(j) : c.hyper().kappa);
    out.mean(j) = p.mean;
    out.variance(j) = p.variance;
  }
  return out;
}

EmulatorPrediction PcEmulator::predict(const Eigen::VectorXd& theta, const Eigen::VectorXd* sills) const {
  const auto rot = rotate(theta);
  if (rot.extrapolated) spdlog::warn("emulator queried outside the design box; extrapolating");
  return predict_rotated(rot, sills);
}

Eigen::VectorXd PcEmulator::predict_field(const Eigen::VectorXd& theta) const {
  return reconstruct(basis_, predict(theta).mean, column_means_);
}

}  // namespace pccal
