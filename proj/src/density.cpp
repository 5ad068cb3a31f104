#include "pccal/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pccal/errors.hpp"

namespace pccal {

double trapezoid(const Eigen::VectorXd& grid, const Eigen::VectorXd& values) {
  double total = 0.0;
  for (Eigen::Index i = 1; i < grid.size(); ++i) total += 0.5 * (grid(i) - grid(i - 1)) * (values(i) + values(i - 1));
  return total;
}

double sample_mean(std::span<const double> samples) {
  if (samples.empty()) throw ValidationError("empty sample");
  double s = 0.0;
  for (double x : samples) s += x;
  return s / static_cast<double>(samples.size());
}

double sample_sd(std::span<const double> samples) {
  if (samples.size() < 2) return 0.0;
  const double m = sample_mean(samples);
  double ss = 0.0;
  for (double x : samples) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(samples.size() - 1));
}

double quantile(std::vector<double> samples, double prob) {
  if (samples.empty()) throw ValidationError("empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw ValidationError(fmt::format("probability {} outside [0, 1]", prob));
  std::sort(samples.begin(), samples.end());
  const double h = prob * static_cast<double>(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, samples.size() - 1);
  return samples[lo] + (h - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
}

Interval equal_tailed_interval(std::span<const double> samples, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("interval level must lie in (0, 1)");
  std::vector<double> v(samples.begin(), samples.end());
  const double tail = 0.5 * (1.0 - level);
  return {quantile(v, tail), quantile(v, 1.0 - tail)};
}

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) return 0.0;
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) return 0.0;
  std::vector<double> v(samples.begin(), samples.end());
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  const double sd = sample_sd(samples);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

DensityTable kde(std::span<const double> samples, double lo, double hi, int points, std::optional<double> bandwidth) {
  if (samples.empty()) throw ValidationError("cannot estimate a density from an empty chain");
  if (points < 2) throw ValidationError("density grid needs at least 2 points");
  if (!(hi > lo)) throw ValidationError(fmt::format("density grid range [{}, {}] is empty", lo, hi));
  if (bandwidth && !(*bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
  DensityTable t;
  t.grid = Eigen::VectorXd::LinSpaced(points, lo, hi);
  const double spacing = (hi - lo) / (points - 1);
  t.bandwidth = std::max(bandwidth.value_or(silverman_bandwidth(samples)), 0.5 * spacing);
  t.density = Eigen::VectorXd::Zero(points);

  // Gaussian tails beyond 8 bandwidths contribute below double precision
  const double h = t.bandwidth;
  const double reach = 8.0 * h;
  for (double x : samples) {
    const auto first = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil((x - reach - lo) / spacing)));
    const auto last = std::min<Eigen::Index>(points - 1, static_cast<Eigen::Index>(std::floor((x + reach - lo) / spacing)));
    for (Eigen::Index i = first; i <= last; ++i) {
      const double u = (t.grid(i) - x) / h;
      t.density(i) += std::exp(-0.5 * u * u);
    }
  }
  const double mass = trapezoid(t.grid, t.density);
  if (!(mass > 0.0)) {
    // every sample lies outside the grid: keep a spike at the nearest end
    Eigen::Index nearest = sample_mean(samples) < lo ? 0 : points - 1;
    t.density(nearest) = 1.0;
    t.density /= trapezoid(t.grid, t.density);
    return t;
  }
  t.density /= mass;
  return t;
}

DensityTable kde_auto_range(std::span<const double> samples, int points, std::optional<double> bandwidth) {
  if (samples.empty()) throw ValidationError("cannot estimate a density from an empty chain");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  double h = bandwidth.value_or(silverman_bandwidth(samples));
  if (!(h > 0.0)) h = std::max(1e-8, 1e-6 * std::abs(*mn));
  return kde(samples, *mn - 4.0 * h, *mx + 4.0 * h, points, bandwidth);
}

double density_mode(const DensityTable& table) {
  Eigen::Index arg = 0;
  table.density.maxCoeff(&arg);
  return table.grid(arg);
}

double density_mean(const DensityTable& table) {
  const Eigen::VectorXd xf = table.grid.cwiseProduct(table.density);
  return trapezoid(table.grid, xf) / trapezoid(table.grid, table.density);
}

double l1_distance(const DensityTable& a, const DensityTable& b) {
  if (a.grid.size() != b.grid.size() || !a.grid.isApprox(b.grid, 1e-12))
    throw ValidationError("densities are not on a common grid");
  return trapezoid(a.grid, (a.density - b.density).cwiseAbs());
}

double batch_means_se(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 4) throw ValidationError("batch means need at least 4 draws");
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t size = n / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < size; ++i) s += samples[b * size + i];
    means[b] = s / static_cast<double>(size);
  }
  return sample_sd(means) / std::sqrt(static_cast<double>(batches));
}

}  // namespace pccal
