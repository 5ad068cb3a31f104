#include "pccal/gp_component.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pccal/errors.hpp"
#include "pccal/optimize.hpp"

namespace pccal {

void GpHyperparams::validate() const {
  if (!(kappa >= 0.0) || !(zeta >= 0.0) || !(kappa + zeta > 0.0))
    throw ValidationError(fmt::format("invalid sill/nugget ({}, {})", kappa, zeta));
  for (Eigen::Index i = 0; i < phis.size(); ++i)
    if (!(phis(i) > 0.0)) throw ValidationError(fmt::format("range parameter {} is not positive", i));
}

double sq_exp_cov(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyperparams& hyper) {
  if (a.size() != b.size() || a.size() != hyper.phis.size())
    throw ValidationError("parameter dimension mismatch in covariance evaluation");
  hyper.validate();
  const double d2 = (a - b).cwiseQuotient(hyper.phis).squaredNorm();
  return hyper.kappa * std::exp(-d2) + (a == b ? hyper.zeta : 0.0);
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& phis) {
  const Eigen::Index p = X.rows();
  const Eigen::MatrixXd Xs = X * phis.cwiseInverse().asDiagonal();
  Eigen::MatrixXd R(p, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    R(k, k) = 1.0;
    for (Eigen::Index l = 0; l < k; ++l) {
      const double v = std::exp(-(Xs.row(k) - Xs.row(l)).squaredNorm());
      R(k, l) = v;
      R(l, k) = v;
    }
  }
  return R;
}

Eigen::VectorXd correlation_vector(const Eigen::MatrixXd& X, const Eigen::VectorXd& x, const Eigen::VectorXd& phis) {
  const Eigen::VectorXd inv = phis.cwiseInverse();
  Eigen::VectorXd r(X.rows());
  for (Eigen::Index k = 0; k < X.rows(); ++k)
    r(k) = std::exp(-(X.row(k).transpose() - x).cwiseProduct(inv).squaredNorm());
  return r;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace

double gp_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyperparams& hyper) {
  const Eigen::Index p = X.rows();
  Eigen::MatrixXd C = hyper.kappa * correlation_matrix(X, hyper.phis);
  C.diagonal().array() += hyper.zeta;
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(p) * kLog2Pi;
}

double gp_loglik_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyperparams& hyper,
                          Eigen::VectorXd& gradient) {
  const Eigen::Index p = X.rows();
  const Eigen::Index q = X.cols();
  gradient.setZero(2 + q);
  const Eigen::MatrixXd R = correlation_matrix(X, hyper.phis);
  Eigen::MatrixXd C = hyper.kappa * R;
  C.diagonal().array() += hyper.zeta;
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double value = -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(p) * kLog2Pi;

  // d loglik / d t = 0.5 tr((alpha alpha^T - C^-1) dC/dt)
  Eigen::MatrixXd W = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd WR = W.cwiseProduct(R);
  gradient(0) = 0.5 * hyper.kappa * WR.sum();
  gradient(1) = 0.5 * hyper.zeta * W.trace();
  for (Eigen::Index i = 0; i < q; ++i) {
    const double inv2 = 1.0 / (hyper.phis(i) * hyper.phis(i));
    double acc = 0.0;
    for (Eigen::Index k = 0; k < p; ++k)
      for (Eigen::Index l = 0; l < k; ++l) {
        const double d = X(k, i) - X(l, i);
        acc += WR(k, l) * d * d;
      }
    // symmetric off-diagonal pairs counted twice; dR/dlog(phi) = R * 2 d^2 / phi^2
    gradient(2 + i) = 0.5 * hyper.kappa * 2.0 * acc * 2.0 * inv2;
  }
  return value;
}

namespace {

double median_nearest_neighbour(const Eigen::MatrixXd& X) {
  std::vector<double> nn;
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index l = 0; l < X.rows(); ++l) {
      if (l == k) continue;
      const double d = (X.row(k) - X.row(l)).norm();
      if (d > 0.0) best = std::min(best, d);
    }
    if (std::isfinite(best)) nn.push_back(best);
  }
  if (nn.empty()) return 0.0;
  std::nth_element(nn.begin(), nn.begin() + static_cast<std::ptrdiff_t>(nn.size() / 2), nn.end());
  return nn[nn.size() / 2];
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

}  // namespace

GpHyperparams fit_component(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpFitOptions& options,
                            GpFitDiagnostics* diagnostics) {
  const Eigen::Index p = X.rows();
  const Eigen::Index q = X.cols();
  if (p < 3) throw ValidationError("fitting a component needs at least three design points");
  if (y.size() != p) throw ValidationError("score column length does not match the design");
  const double v = y.squaredNorm() / static_cast<double>(p);
  if (!(v > 0.0)) throw ValidationError("score column has zero variance");

  const Eigen::Index d = 2 + q;
  Eigen::VectorXd lo(d), hi(d);
  lo(0) = std::log(1e-6 * v);
  hi(0) = std::log(1e4 * v);
  lo(1) = std::log(options.min_relative_nugget * v);
  hi(1) = std::log(10.0 * v);
  const double phi_lo = std::max(median_nearest_neighbour(X), 1e-3);
  for (Eigen::Index i = 0; i < q; ++i) {
    lo(2 + i) = std::log(phi_lo);
    hi(2 + i) = std::log(20.0);
  }
  const Eigen::VectorXd width = hi - lo;

  auto to_hyper = [&](const Eigen::VectorXd& logs) {
    GpHyperparams h;
    h.kappa = std::exp(logs(0));
    h.zeta = std::exp(logs(1));
    h.phis = logs.tail(q).array().exp();
    return h;
  };
  Objective objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& grad) {
    Eigen::VectorXd s(d), logs(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      s(i) = sigmoid(u(i));
      logs(i) = lo(i) + width(i) * s(i);
    }
    Eigen::VectorXd g;
    const double ll = gp_loglik_gradient(X, y, to_hyper(logs), g);
    if (!std::isfinite(ll)) {
      grad.setZero(d);
      return std::numeric_limits<double>::infinity();
    }
    grad = -(g.array() * width.array() * s.array() * (1.0 - s.array())).matrix();
    return -ll;
  };

  // start 0: unit-variance sill, small nugget, mid-range lengths; others: Latin hypercube
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int starts = std::max(options.restarts, 1);
  std::vector<Eigen::VectorXd> fractions(static_cast<std::size_t>(starts), Eigen::VectorXd(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    std::vector<int> perm(static_cast<std::size_t>(starts));
    for (int k = 0; k < starts; ++k) perm[static_cast<std::size_t>(k)] = k;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int k = 0; k < starts; ++k)
      fractions[static_cast<std::size_t>(k)](i) =
          (perm[static_cast<std::size_t>(k)] + unif(rng)) / static_cast<double>(starts);
  }
  {
    Eigen::VectorXd& f0 = fractions[0];
    f0(0) = (std::log(v) - lo(0)) / width(0);
    f0(1) = (std::log(1e-4 * v) - lo(1)) / width(1);
    for (Eigen::Index i = 0; i < q; ++i) f0(2 + i) = (std::log(0.3) - lo(2 + i)) / width(2 + i);
  }

  MinimizeOptions mopt;
  mopt.max_iterations = options.max_iterations;
  GpFitDiagnostics diag;
  diag.best_loglik = -std::numeric_limits<double>::infinity();
  double best_any = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_u;
  for (const auto& f : fractions) {
    Eigen::VectorXd u0(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double c = std::clamp(f(i), 0.02, 0.98);
      u0(i) = std::log(c / (1.0 - c));
    }
    const MinimizeResult r = minimize_bfgs(objective, u0, mopt);
    diag.evaluations += r.evaluations;
    if (std::isfinite(r.value)) best_any = std::max(best_any, -r.value);
    if (!r.converged || !std::isfinite(r.value)) continue;
    ++diag.converged_starts;
    if (-r.value > diag.best_loglik) {
      diag.best_loglik = -r.value;
      best_u = r.x;
    }
  }
  if (diagnostics) *diagnostics = diag;
  if (diag.converged_starts == 0)
    throw NumericalError(fmt::format(
        "likelihood maximization did not converge from any of {} starts (best log-likelihood {}, {} evaluations)",
        starts, best_any, diag.evaluations));
  Eigen::VectorXd logs(d);
  for (Eigen::Index i = 0; i < d; ++i) logs(i) = lo(i) + width(i) * sigmoid(best_u(i));
  return to_hyper(logs);
}

GpComponent::GpComponent(Eigen::MatrixXd X, Eigen::VectorXd y, GpHyperparams hyper)
    : X_(std::move(X)), y_(std::move(y)), hyper_(std::move(hyper)) {
  hyper_.validate();
  if (hyper_.phis.size() != X_.cols()) throw ValidationError("range count does not match parameter dimension");
  if (y_.size() != X_.rows()) throw ValidationError("score count does not match design size");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(correlation_matrix(X_, hyper_.phis));
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the correlation matrix failed");
  Q_ = eig.eigenvectors();
  r_ = eig.eigenvalues().cwiseMax(0.0);
  const double floor = (hyper_.kappa * r_.array() + hyper_.zeta).minCoeff();
  if (!(floor > 1e-14 * (hyper_.kappa + hyper_.zeta)))
    throw NumericalError("component covariance is singular; use a larger nugget");
  yq_ = Q_.transpose() * y_;
}

Eigen::VectorXd GpComponent::rotate(const Eigen::VectorXd& x_star) const {
  return Q_.transpose() * correlation_vector(X_, x_star, hyper_.phis);
}

PointPrediction GpComponent::predict_rotated(const Eigen::VectorXd& rotated, double kappa) const {
  const Eigen::ArrayXd w = (kappa * r_.array() + hyper_.zeta).inverse();
  PointPrediction out;
  out.mean = kappa * (rotated.array() * w * yq_.array()).sum();
  out.variance = kappa + hyper_.zeta - kappa * kappa * (rotated.array().square() * w).sum();
  if (out.variance < 0.0) {
    spdlog::debug("clamping negative predictive variance {} to zero", out.variance);
    out.variance = 0.0;
  }
  return out;
}

void GpComponent::predict_joint(const Eigen::MatrixXd& Xs, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) const {
  const Eigen::Index m = Xs.rows();
  Eigen::MatrixXd Rs(X_.rows(), m);
  for (Eigen::Index l = 0; l < m; ++l) Rs.col(l) = correlation_vector(X_, Xs.row(l).transpose(), hyper_.phis);
  const Eigen::MatrixXd A = Q_.transpose() * Rs;
  const Eigen::VectorXd w = (hyper_.kappa * r_.array() + hyper_.zeta).inverse();
  mean = hyper_.kappa * A.transpose() * w.cwiseProduct(yq_);
  cov = hyper_.kappa * correlation_matrix(Xs, hyper_.phis);
  cov.diagonal().array() += hyper_.zeta;
  cov.noalias() -= hyper_.kappa * hyper_.kappa * A.transpose() * w.asDiagonal() * A;
  cov = 0.5 * (cov + cov.transpose()).eval();
}

}  // namespace pccal
