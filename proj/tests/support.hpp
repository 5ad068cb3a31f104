#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pccal/emulator.hpp"

namespace pccal::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = z(rng);
  return m;
}

inline Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rows, cols, rng));
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

/// Unit-box design with p points in q dimensions: a jittered stratification
/// along the first axis, uniform elsewhere.
inline Eigen::MatrixXd unit_design(Eigen::Index p, Eigen::Index q, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd X(p, q);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < q; ++k) {
    for (Eigen::Index i = 0; i < p; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index i = 0; i < p; ++i)
      X(i, k) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + u(rng)) / static_cast<double>(p);
  }
  return X;
}

/// Joint draw of J independent zero-mean GPs at the rows of X, each with
/// squared-exponential correlation of range `phi` in every dimension plus a
/// nugget of relative size `nugget`.
inline Eigen::MatrixXd gp_draws(const Eigen::MatrixXd& X, Eigen::Index J, double phi, double nugget,
                                std::mt19937_64& rng) {
  const Eigen::Index p = X.rows();
  Eigen::MatrixXd C(p, p);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b)
      C(a, b) = std::exp(-(X.row(a) - X.row(b)).squaredNorm() / (phi * phi)) + (a == b ? nugget : 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  return llt.matrixL() * random_matrix(p, J, rng);
}

/// Ensemble whose outputs are sum_j s_j f_j(theta) b_j + mean with f_j GP
/// draws, b_j orthonormal spatial patterns and s_j = decay^j: every
/// principal-component score of the design is then a GP in theta.
struct GpEnsemble {
  Eigen::MatrixXd thetas;
  Eigen::MatrixXd outputs;
  EnsembleDesign design;
};

inline GpEnsemble gp_ensemble(Eigen::Index p, Eigen::Index q, Eigen::Index n, Eigen::Index J, std::uint64_t seed,
                              double phi = 0.6, double nugget = 1e-6, double decay = 0.8) {
  std::mt19937_64 rng(seed);
  GpEnsemble e;
  e.thetas = unit_design(p, q, rng);
  const Eigen::MatrixXd f = gp_draws(e.thetas, J, phi, nugget, rng);
  const Eigen::MatrixXd b = random_orthonormal(n, J, rng);
  Eigen::VectorXd s(J);
  for (Eigen::Index j = 0; j < J; ++j) s(j) = 10.0 * std::pow(decay, static_cast<double>(j));
  const Eigen::RowVectorXd mean = Eigen::RowVectorXd::LinSpaced(n, 1.0, 2.0);
  e.outputs = (f * s.asDiagonal() * b.transpose()).rowwise() + mean;
  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < q; ++k) names.push_back("t" + std::to_string(k));
  e.design = EnsembleDesign::from_raw(names, e.thetas, e.outputs);
  return e;
}

/// Asymptotic Kolmogorov tail probability P(K > lambda).
inline double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS test against a continuous CDF; returns the p-value with the
/// small-sample correction of Stephens.
template <class Cdf>
double ks_pvalue(std::vector<double> x, Cdf cdf, double* statistic = nullptr) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  if (statistic) *statistic = d;
  const double sn = std::sqrt(n);
  return kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Least-squares slope of log(y) on log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  const auto dir = std::filesystem::temp_directory_path() / ("pccal_" + tag + "_" + std::to_string(rng() % 1000000007));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace pccal::testing
