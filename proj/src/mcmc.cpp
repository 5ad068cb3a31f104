#include "pccal/mcmc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "pccal/density.hpp"
#include "pccal/errors.hpp"
#include "pccal/field_io.hpp"

namespace pccal {

namespace {

double target_rate(Eigen::Index dim) { return dim <= 1 ? 0.44 : 0.234; }

enum Block { kTheta = 0, kSigma2 = 1, kKappaD = 2, kKappaY = 3 };
constexpr const char* kBlockNames[] = {"theta", "sigma2", "kappa_d", "kappa_y"};

}  // namespace

void AdaptiveScale::record(bool accepted, bool adapting) {
  ++proposed_;
  if (accepted) ++accepted_;
  if (!adapting) return;
  ++batch_seen_;
  if (accepted) ++batch_accepted_;
  if (batch_seen_ < batch_) return;
  ++batches_;
  const double rate = static_cast<double>(batch_accepted_) / batch_seen_;
  const double delta = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(batches_)));
  scale_ *= std::exp(rate > target_ ? delta : -delta);
  batch_seen_ = 0;
  batch_accepted_ = 0;
}

bool metropolis_accept(double log_ratio, std::mt19937_64& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::log(unif(rng)) < log_ratio;
}

std::vector<double> sample_random_walk(const std::function<double(double)>& log_density, double x0, double step,
                                       std::size_t draws, std::size_t thin, std::uint64_t seed) {
  if (!(step > 0.0) || thin == 0) throw ValidationError("random walk needs a positive step and thinning");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double x = x0;
  double lp = log_density(x);
  if (!std::isfinite(lp)) throw ValidationError("initial state has zero density");
  std::vector<double> out;
  out.reserve(draws);
  while (out.size() < draws) {
    for (std::size_t t = 0; t < thin; ++t) {
      const double y = x + step * normal(rng);
      const double ly = log_density(y);
      if (metropolis_accept(ly - lp, rng)) {
        x = y;
        lp = ly;
      }
    }
    out.push_back(x);
  }
  return out;
}

void McmcConfig::validate() const {
  if (iterations < 1) throw ValidationError(fmt::format("chain length must be positive, got {}", iterations));
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw ValidationError(fmt::format("burn-in fraction {} outside [0, 1)", burn_in_fraction));
  for (double s : {scales.theta, scales.log_sigma2, scales.log_kappa_d, scales.log_kappa_y})
    if (!(s > 0.0)) throw ValidationError("proposal scales must be positive");
  if (warmup_window < 1) throw ValidationError("warm-up window must be positive");
}

std::vector<std::string> CalibrationPosterior::column_names() const {
  std::vector<std::string> names;
  for (const auto& n : theta_names) names.push_back("theta." + n);
  names.emplace_back("sigma2");
  names.emplace_back("kappa_d");
  for (Eigen::Index j = 0; j < j_y; ++j) names.push_back(fmt::format("kappa_y.{}", j + 1));
  return names;
}

Eigen::Index CalibrationPosterior::column_index(const std::string& name) const {
  const auto names = column_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name || (i < theta_names.size() && theta_names[i] == name)) return static_cast<Eigen::Index>(i);
  throw ValidationError(fmt::format("chain has no column '{}'", name));
}

std::vector<double> CalibrationPosterior::draws(const std::string& name) const {
  const Eigen::Index c = column_index(name);
  std::vector<double> out;
  for (Eigen::Index i = burn_in; i < samples.rows(); ++i) out.push_back(samples(i, c));
  if (out.empty()) throw ValidationError("chain has no draws after burn-in");
  return out;
}

CalibrationPosterior run_mcmc(const ReducedObservation& zr, const PcEmulator& emulator, const PriorSpec& priors,
                              const McmcConfig& config) {
  config.validate();
  const Eigen::Index q = emulator.parameters();
  const Eigen::Index jy = emulator.components();
  priors.validate(q, jy);
  if (config.use_likelihood && zr.j_y != jy)
    throw ValidationError("reduced observation and emulator disagree on the number of components");

  CalibrationState state;
  if (config.initial) {
    state = *config.initial;
  } else {
    state.theta = 0.5 * (priors.theta_lower + priors.theta_upper);
    state.sigma2 = priors.b_z / (priors.a_z + 1.0);
    state.kappa_d = priors.b_nu / (priors.a_nu + 1.0);
    state.kappa_y = emulator.sills();
  }
  if (state.theta.size() != q || state.kappa_y.size() != jy) throw ValidationError("initial state has wrong shape");

  std::vector<Eigen::Index> free;
  for (Eigen::Index k = 0; k < q; ++k)
    if (priors.is_free(k)) free.push_back(k);
  const auto n_free = static_cast<Eigen::Index>(free.size());

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  EmulatorRotation rotation;
  EmulatorPrediction prediction;
  auto loglik = [&](const EmulatorPrediction& pred, double s2, double kd) {
    return config.use_likelihood ? reduced_loglik(zr, pred, s2, kd) : 0.0;
  };
  if (config.use_likelihood) {
    rotation = emulator.rotate(state.theta);
    prediction = emulator.predict_rotated(rotation, &state.kappa_y);
  }
  double lp = log_prior(state, priors);
  double ll = loglik(prediction, state.sigma2, state.kappa_d);
  if (!std::isfinite(lp + ll)) throw ValidationError("initial state has a non-finite log-posterior");

  std::array<AdaptiveScale, 4> scales = {AdaptiveScale(config.scales.theta, target_rate(n_free)),
                                         AdaptiveScale(config.scales.log_sigma2, target_rate(1)),
                                         AdaptiveScale(config.scales.log_kappa_d, target_rate(1)),
                                         AdaptiveScale(config.scales.log_kappa_y, target_rate(jy))};
  const std::array<bool, 4> active = {n_free > 0, true, true, config.sample_kappa_y && jy > 0};

  CalibrationPosterior post;
  post.theta_names = emulator.parameter_names();
  post.j_y = jy;
  post.seed = config.seed;
  post.burn_in = static_cast<long>(std::floor(config.burn_in_fraction * static_cast<double>(config.iterations)));
  post.samples.resize(config.iterations, q + 2 + jy);
  post.log_post.resize(config.iterations);
  post.accepted.setZero(config.iterations, 4);

  const Eigen::VectorXd width = priors.theta_upper - priors.theta_lower;
  for (long it = 0; it < config.iterations; ++it) {
    const bool adapting = config.adapt && it < post.burn_in;

    if (active[kTheta]) {
      CalibrationState prop = state;
      for (Eigen::Index k : free) prop.theta(k) += scales[kTheta].scale() * width(k) * normal(rng);
      const double lp_new = log_prior(prop, priors);
      bool ok = false;
      if (std::isfinite(lp_new)) {
        EmulatorRotation rot_new;
        EmulatorPrediction pred_new;
        if (config.use_likelihood) {
          rot_new = emulator.rotate(prop.theta);
          pred_new = emulator.predict_rotated(rot_new, &prop.kappa_y);
        }
        const double ll_new = loglik(pred_new, prop.sigma2, prop.kappa_d);
        ok = metropolis_accept(lp_new + ll_new - lp - ll, rng);
        if (ok) {
          state = std::move(prop);
          rotation = std::move(rot_new);
          prediction = std::move(pred_new);
          lp = lp_new;
          ll = ll_new;
        }
      }
      scales[kTheta].record(ok, adapting);
      post.accepted(it, kTheta) = ok;
    }

    for (Block b : {kSigma2, kKappaD}) {
      double& x = b == kSigma2 ? state.sigma2 : state.kappa_d;
      const double old = x;
      const double step = scales[b].scale() * normal(rng);
      x = old * std::exp(step);
      const double lp_new = log_prior(state, priors);
      const double ll_new = loglik(prediction, state.sigma2, state.kappa_d);
      // log-scale walk: the Jacobian adds log(x_new / x_old) = step
      const bool ok = metropolis_accept(lp_new + ll_new - lp - ll + step, rng);
      if (ok) {
        lp = lp_new;
        ll = ll_new;
      } else {
        x = old;
      }
      scales[b].record(ok, adapting);
      post.accepted(it, b) = ok;
    }

    if (active[kKappaY]) {
      CalibrationState prop = state;
      double jacobian = 0.0;
      for (Eigen::Index j = 0; j < jy; ++j) {
        const double step = scales[kKappaY].scale() * normal(rng);
        prop.kappa_y(j) *= std::exp(step);
        jacobian += step;
      }
      const double lp_new = log_prior(prop, priors);
      EmulatorPrediction pred_new;
      if (config.use_likelihood) pred_new = emulator.predict_rotated(rotation, &prop.kappa_y);
      const double ll_new = loglik(pred_new, prop.sigma2, prop.kappa_d);
      const bool ok = metropolis_accept(lp_new + ll_new - lp - ll + jacobian, rng);
      if (ok) {
        state = std::move(prop);
        prediction = std::move(pred_new);
        lp = lp_new;
        ll = ll_new;
      }
      scales[kKappaY].record(ok, adapting);
      post.accepted(it, kKappaY) = ok;
    }

    post.samples.row(it).head(q) = state.theta.transpose();
    post.samples(it, q) = state.sigma2;
    post.samples(it, q + 1) = state.kappa_d;
    post.samples.row(it).tail(jy) = state.kappa_y.transpose();
    post.log_post(it) = lp + ll;

    if (it + 1 == config.warmup_window && config.iterations > config.warmup_window) {
      for (int b = 0; b < 4; ++b)
        if (active[static_cast<std::size_t>(b)] && scales[static_cast<std::size_t>(b)].accepted() == 0)
          throw NumericalError(fmt::format("no {} proposal was accepted in the first {} iterations; "
                                           "rescale the {} proposal",
                                           kBlockNames[b], config.warmup_window, kBlockNames[b]));
    }
    if (config.iterations >= 10 && (it + 1) % (config.iterations / 10) == 0)
      spdlog::debug("mcmc: {}/{} iterations", it + 1, config.iterations);
  }

  for (int b = 0; b < 4; ++b) {
    const auto& s = scales[static_cast<std::size_t>(b)];
    post.blocks.push_back({kBlockNames[b], s.proposed(), s.accepted(), s.scale()});
  }
  return post;
}

std::vector<SplitHalfSummary> split_half(const CalibrationPosterior& chain, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split fraction must lie in (0, 1)");
  std::vector<SplitHalfSummary> out;
  for (const auto& name : chain.column_names()) {
    const auto all = chain.draws(name);
    const auto early_n = std::max<std::size_t>(2, static_cast<std::size_t>(fraction * static_cast<double>(all.size())));
    const std::span<const double> early(all.data(), std::min(early_n, all.size()));
    SplitHalfSummary s;
    s.parameter = name;
    s.early_mean = sample_mean(early);
    s.full_mean = sample_mean(all);
    s.early_sd = sample_sd(early);
    s.full_sd = sample_sd(all);
    const auto ie = equal_tailed_interval(early);
    const auto ia = equal_tailed_interval(all);
    s.early_lower = ie.lower;
    s.early_upper = ie.upper;
    s.full_lower = ia.lower;
    s.full_upper = ia.upper;
    out.push_back(s);
  }
  return out;
}

void write_chain_csv(const std::filesystem::path& path, const CalibrationPosterior& chain) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  auto names = chain.column_names();
  names.emplace_back("log_post");
  for (const char* b : kBlockNames) names.push_back(fmt::format("accepted.{}", b));
  out << fmt::format("{}\n", fmt::join(names, ","));
  std::string line;
  for (Eigen::Index i = 0; i < chain.samples.rows(); ++i) {
    line.clear();
    for (Eigen::Index c = 0; c < chain.samples.cols(); ++c) {
      line += format_double(chain.samples(i, c));
      line += ',';
    }
    line += format_double(chain.log_post(i));
    for (Eigen::Index b = 0; b < chain.accepted.cols(); ++b) line += chain.accepted(i, b) ? ",1" : ",0";
    line += '\n';
    out << line;
  }
}

}  // namespace pccal
