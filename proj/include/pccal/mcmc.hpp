#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pccal/calibrator.hpp"
#include "pccal/emulator.hpp"

namespace pccal {

/// Random-walk step size with diminishing adaptation toward a target
/// acceptance rate. Adaptation only happens while `adapting` is true.
class AdaptiveScale {
 public:
  explicit AdaptiveScale(double initial = 1.0, double target = 0.44, int batch = 50)
      : scale_(initial), target_(target), batch_(batch) {}

  double scale() const { return scale_; }
  long proposed() const { return proposed_; }
  long accepted() const { return accepted_; }
  double acceptance_rate() const { return proposed_ > 0 ? static_cast<double>(accepted_) / proposed_ : 0.0; }

  void record(bool accepted, bool adapting);

 private:
  double scale_;
  double target_;
  int batch_;
  long proposed_ = 0;
  long accepted_ = 0;
  int batch_seen_ = 0;
  int batch_accepted_ = 0;
  int batches_ = 0;
};

/// log u < log_ratio for u ~ U(0, 1).
bool metropolis_accept(double log_ratio, std::mt19937_64& rng);

/// Random-walk Metropolis on a scalar log-density; returns every `thin`-th state.
std::vector<double> sample_random_walk(const std::function<double(double)>& log_density, double x0, double step,
                                       std::size_t draws, std::size_t thin, std::uint64_t seed);

struct ProposalScales {
  double theta = 0.1;  // fraction of each prior range
  double log_sigma2 = 0.5;
  double log_kappa_d = 0.5;
  double log_kappa_y = 0.1;
};

struct McmcConfig {
  long iterations = 25000;
  double burn_in_fraction = 0.2;
  std::uint64_t seed = 1;
  bool adapt = true;
  ProposalScales scales;
  /// Prior-only sampling when false.
  bool use_likelihood = true;
  /// Keep kappa_y at its initial value when false.
  bool sample_kappa_y = true;
  /// Iterations after which a block with no accepted move is an error.
  long warmup_window = 1000;
  std::optional<CalibrationState> initial;

  void validate() const;
};

struct BlockStats {
  std::string name;
  long proposed = 0;
  long accepted = 0;
  double final_scale = 0.0;

  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0; }
};

struct SplitHalfSummary {
  std::string parameter;
  double early_mean = 0.0, full_mean = 0.0;
  double early_sd = 0.0, full_sd = 0.0;
  double early_lower = 0.0, full_lower = 0.0;
  double early_upper = 0.0, full_upper = 0.0;
};

/// Sampled chain. Columns of `samples` follow `column_names()`:
/// theta.<name>..., sigma2, kappa_d, kappa_y.<j>... (j from 1).
struct CalibrationPosterior {
  std::vector<std::string> theta_names;
  Eigen::Index j_y = 0;
  Eigen::MatrixXd samples;
  Eigen::VectorXd log_post;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> accepted;  // iterations x blocks
  std::vector<BlockStats> blocks;
  long burn_in = 0;
  std::uint64_t seed = 0;

  std::vector<std::string> column_names() const;
  Eigen::Index column_index(const std::string& name) const;
  /// Post-burn-in draws of one column.
  std::vector<double> draws(const std::string& name) const;
  long iterations() const { return static_cast<long>(samples.rows()); }
};

/// Blockwise random-walk Metropolis-Hastings over (theta, sigma^2, kappa_d,
/// kappa_y). Each iteration updates theta jointly, then log sigma^2, log
/// kappa_d and log kappa_y jointly. Scales adapt during burn-in only.
/// Starts at the prior midpoint for theta, the prior modes for sigma^2 and
/// kappa_d and the fitted sills, unless `config.initial` is set.
CalibrationPosterior run_mcmc(const ReducedObservation& zr, const PcEmulator& emulator, const PriorSpec& priors,
                              const McmcConfig& config);

/// Summaries of the first `fraction` of post-burn-in draws against all of them.
std::vector<SplitHalfSummary> split_half(const CalibrationPosterior& chain, double fraction = 0.6);

void write_chain_csv(const std::filesystem::path& path, const CalibrationPosterior& chain);

}  // namespace pccal
