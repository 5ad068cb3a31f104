#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace pccal {

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

struct MinimizeOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double value_tolerance = 1e-11;
};

/// f(x, grad) returns the objective and writes its gradient. A non-finite
/// return marks an infeasible point; the line search backs away from it.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Quasi-Newton (BFGS) minimization with an Armijo backtracking line search.
inline MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& opt = {}) {
  const Eigen::Index d = x0.size();
  MinimizeResult res;
  Eigen::VectorXd g(d), g_new(d);
  double fx = f(x0, g);
  res.evaluations = 1;
  res.x = x0;
  res.value = fx;
  if (!std::isfinite(fx)) return res;

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd x = x0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance * (1.0 + std::abs(fx))) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -H * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      H.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    // cap the first trial step so transformed coordinates do not jump across the box
    const double max_move = dir.lpNorm<Eigen::Infinity>();
    if (max_move > 5.0) step = 5.0 / max_move;
    Eigen::VectorXd x_new(d);
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * dir;
      f_new = f(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no descent possible along the current direction: treat as stationary
      res.converged = g.lpNorm<Eigen::Infinity>() < 1e-3 * (1.0 + std::abs(fx));
      break;
    }
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double change = fx - f_new;
    x = x_new;
    g = g_new;
    fx = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    if (change < opt.value_tolerance * (1.0 + std::abs(fx))) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.value = fx;
  return res;
}

}  // namespace pccal
