#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pccal {

/// Density values on an ascending, evenly spaced grid.
struct DensityTable {
  Eigen::VectorXd grid;
  Eigen::VectorXd density;
  double bandwidth = 0.0;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
  bool contains(double x) const { return x >= lower && x <= upper; }
};

double trapezoid(const Eigen::VectorXd& grid, const Eigen::VectorXd& values);

/// 0.9 min(sd, IQR / 1.34) n^(-1/5); zero for a constant sample.
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian KDE on `points` grid values spanning [lo, hi], normalized to unit
/// trapezoid integral. The bandwidth is floored at half the grid spacing so
/// that a constant sample yields a spike at the nearest grid point.
DensityTable kde(std::span<const double> samples, double lo, double hi, int points = 512,
                 std::optional<double> bandwidth = std::nullopt);

/// Grid range [min - 4h, max + 4h] around the samples.
DensityTable kde_auto_range(std::span<const double> samples, int points = 512,
                            std::optional<double> bandwidth = std::nullopt);

/// Linear-interpolated sample quantile (type 7).
double quantile(std::vector<double> samples, double prob);
Interval equal_tailed_interval(std::span<const double> samples, double level = 0.95);

double density_mode(const DensityTable& table);
double density_mean(const DensityTable& table);

/// Trapezoid L1 distance between two densities on the same grid.
double l1_distance(const DensityTable& a, const DensityTable& b);

/// Monte-Carlo standard error of the mean by non-overlapping batch means
/// (floor(sqrt(n)) batches).
double batch_means_se(std::span<const double> samples);

double sample_mean(std::span<const double> samples);
double sample_sd(std::span<const double> samples);

}  // namespace pccal
