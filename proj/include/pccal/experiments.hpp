#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pccal/calibrator.hpp"
#include "pccal/density.hpp"
#include "pccal/discrepancy.hpp"
#include "pccal/emulator.hpp"
#include "pccal/field_grid.hpp"
#include "pccal/field_io.hpp"
#include "pccal/mcmc.hpp"

namespace pccal {

enum class Level { k3D, k2D, k1D };

std::string level_name(Level level);
/// Accepts "3d", "2d", "1d" (case-insensitive).
Level parse_level(std::string_view text);
GridField aggregate(const GridField& field, Level level);

/// Stream-specific seed derived from a base seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct PseudoObsConfig {
  Eigen::VectorXd truth_theta;
  std::vector<Eigen::VectorXd> residual_thetas;
};

/// Truth run plus the per-location mean of (observation - run) over the
/// residual source runs. Runs are matched to design points to 1e-9.
GridField make_pseudo_obs(const EnsembleFields& ensemble, const GridField& observation, const PseudoObsConfig& config);

/// Ensemble and observation on one common set of cells.
struct LevelData {
  std::string label;
  GridSpec grid;
  std::vector<GridIndex> cells;
  EnsembleDesign design;
  Eigen::VectorXd observation;
};

LevelData prepare_level(const EnsembleFields& ensemble, const GridField& observation, Level level);
/// Simple random sample of k observed 3-D cells.
LevelData prepare_subsample(const EnsembleFields& ensemble, const GridField& observation, std::size_t k,
                            std::uint64_t seed);

/// Inverse-gamma scales for kappa_d and sigma^2.
struct PriorChoice {
  double b_nu = 2.0;
  double b_z = 2.0;
  std::string label() const;
};

/// Parses "b_nu:b_z,b_nu:b_z,...".
std::vector<PriorChoice> parse_prior_list(const std::string& text);

struct CalibrationSettings {
  EmulatorOptions emulator;
  DiscrepancySettings discrepancy;
  Eigen::VectorXd theta_lower;
  Eigen::VectorXd theta_upper;
  double a_nu = 2.0;
  double a_z = 2.0;
  double kappa_y_shape = 5.0;
  McmcConfig mcmc;
  int density_points = 512;
  double max_condition = 1e10;
};

PriorSpec make_priors(const CalibrationSettings& settings, const PriorChoice& choice, const Eigen::VectorXd& sills);

/// Emulator, discrepancy basis and reduced observation for one level.
struct LevelModel {
  LevelData data;
  PcEmulator emulator;
  DiscrepancyBasis discrepancy;
  ReducedObservation reduced;
};

/// Fits the emulator and builds the discrepancy basis. When J_y + J_d^PC
/// would exceed the number of locations the discrepancy basis is cut to fit.
LevelModel build_level_model(LevelData data, const CalibrationSettings& settings);

struct CalibrationRun {
  std::string label;
  PriorSpec priors;
  CalibrationPosterior chain;
  /// Free parameters only, each on a grid over its prior range.
  std::vector<std::string> density_parameters;
  std::vector<DensityTable> densities;
};

CalibrationRun calibrate_model(const LevelModel& model, const CalibrationSettings& settings,
                               const PriorChoice& choice, std::uint64_t seed);

/// Pairwise L1 distances, per-density modes and 95% intervals and the
/// equal-weight mixture. Densities must share a grid.
struct SensitivityReport {
  std::vector<std::string> labels;
  Eigen::MatrixXd l1;
  double divergence = 0.0;  // mean pairwise L1
  std::vector<double> modes;
  std::vector<Interval> intervals;
  DensityTable mixture;
};

SensitivityReport prior_sensitivity_report(const std::vector<DensityTable>& densities,
                                           std::vector<std::string> labels);

/// Equal-tailed interval from the cumulative trapezoid integral of a density.
Interval density_interval(const DensityTable& table, double level = 0.95);

struct LevelStudy {
  Level level = Level::k3D;
  Eigen::Index locations = 0;
  Eigen::Index j_y = 0;
  Eigen::Index j_d = 0;
  double condition_number = 1.0;
  std::vector<CalibrationRun> runs;
  SensitivityReport report;  // for the first free parameter
};

/// For every level: aggregate, build the basis, emulate, then calibrate once
/// per prior. Calibrations run in parallel with seeds derived from the
/// configured chain seed, so results do not depend on `threads`.
std::vector<LevelStudy> aggregation_study(const EnsembleFields& ensemble, const GridField& pseudo_obs,
                                          const std::vector<Level>& levels, const std::vector<PriorChoice>& priors,
                                          const CalibrationSettings& settings, int threads);

struct SubsampleStudy {
  std::size_t k = 0;
  std::vector<CalibrationRun> runs;
  std::vector<double> modes;
  std::vector<double> mc_standard_errors;
  double mode_sd = 0.0;
  double mean_mc_se = 0.0;
  /// mode_sd / mean_mc_se
  double spread_ratio = 0.0;
};

SubsampleStudy subsample_study(const EnsembleFields& ensemble, const GridField& pseudo_obs, std::size_t k,
                               int repeats, std::uint64_t seed, const CalibrationSettings& settings,
                               const PriorChoice& prior, int threads);

struct CvRound {
  std::vector<Eigen::Index> held_out;
  double rmse = 0.0;
};

struct CvResult {
  std::vector<CvRound> rounds;
  /// Per round and component: L^-1 (y - mu) with L L^T the joint predictive
  /// covariance of the held-out scores.
  std::vector<double> whitened;
  double fraction_outside(double bound = 2.0) const;
};

/// Repeated random hold-out: refit on the retained runs, predict the held-out
/// runs' scores on the refitted basis.
CvResult cross_validate(const EnsembleDesign& design, const EmulatorOptions& options, double holdout_fraction,
                        int rounds, std::uint64_t seed);

/// Piecewise-linear map from a parameter to a downstream response.
struct ProjectionTable {
  std::vector<double> theta;
  std::vector<double> response;

  /// CSV with a header row and two columns.
  static ProjectionTable read_csv(const std::filesystem::path& path);
  /// Throws ValidationError with fewer than 2 rows or non-increasing theta.
  void validate() const;
  /// Clamps to the table range.
  double operator()(double x) const;
};

struct ProjectionResult {
  std::vector<double> values;
  long clamped = 0;
  DensityTable density;
  Interval interval;
};

ProjectionResult project_response(std::span<const double> theta_draws, const ProjectionTable& table, int points = 512);

}  // namespace pccal
