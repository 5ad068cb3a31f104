#include "pccal/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "pccal/errors.hpp"
#include "pccal/parallel.hpp"

namespace pccal {

std::string level_name(Level level) {
  switch (level) {
    case Level::k3D: return "3d";
    case Level::k2D: return "2d";
    case Level::k1D: return "1d";
  }
  return "?";
}

Level parse_level(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "3d") return Level::k3D;
  if (t == "2d") return Level::k2D;
  if (t == "1d") return Level::k1D;
  throw ValidationError(fmt::format("unknown level '{}' (valid: 3d, 2d, 1d)", text));
}

GridField aggregate(const GridField& field, Level level) {
  switch (level) {
    case Level::k3D: return field;
    case Level::k2D: return zonal_mean(field);
    case Level::k1D: return vertical_mean(field);
  }
  return field;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::size_t find_run(const EnsembleFields& ensemble, const Eigen::VectorXd& theta) {
  if (theta.size() != ensemble.thetas.cols())
    throw ValidationError(fmt::format("parameter vector has length {}, expected {}", theta.size(), ensemble.thetas.cols()));
  for (Eigen::Index i = 0; i < ensemble.thetas.rows(); ++i) {
    const Eigen::VectorXd row = ensemble.thetas.row(i).transpose();
    if (((row - theta).array().abs() <= 1e-9 * (1.0 + theta.array().abs())).all()) return static_cast<std::size_t>(i);
  }
  std::vector<double> t(theta.data(), theta.data() + theta.size());
  throw ValidationError(fmt::format("no ensemble run at parameter setting ({})", fmt::join(t, ", ")));
}

LevelData assemble(const std::vector<GridField>& runs, const GridField& obs, const EnsembleFields& ensemble,
                   std::string label, const std::vector<GridIndex>* cells_override) {
  LevelData d;
  d.label = std::move(label);
  d.grid = obs.spec();
  d.cells = cells_override ? *cells_override : support(runs.front());
  const auto n = static_cast<Eigen::Index>(d.cells.size());
  if (n == 0) throw ValidationError("no valid cells");
  Eigen::MatrixXd outputs(static_cast<Eigen::Index>(runs.size()), n);
  d.observation.resize(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto flat = d.grid.flat_index(d.cells[static_cast<std::size_t>(c)]);
    d.observation(c) = obs.values()[flat];
    for (std::size_t r = 0; r < runs.size(); ++r) outputs(static_cast<Eigen::Index>(r), c) = runs[r].values()[flat];
  }
  d.design = EnsembleDesign::from_raw(ensemble.parameter_names, ensemble.thetas, outputs);
  return d;
}

}  // namespace

GridField make_pseudo_obs(const EnsembleFields& ensemble, const GridField& observation, const PseudoObsConfig& config) {
  if (ensemble.runs.empty()) throw ValidationError("empty ensemble");
  if (config.residual_thetas.empty()) throw ValidationError("pseudo-observations need at least one residual source");
  check_colocated({ensemble.runs.front(), observation});
  const GridField& truth = ensemble.runs[find_run(ensemble, config.truth_theta)];
  std::vector<double> values = truth.values();
  const double weight = 1.0 / static_cast<double>(config.residual_thetas.size());
  for (const auto& theta : config.residual_thetas) {
    const GridField& run = ensemble.runs[find_run(ensemble, theta)];
    for (std::size_t f = 0; f < values.size(); ++f)
      if (truth.valid(f)) values[f] += weight * (observation.values()[f] - run.values()[f]);
  }
  return GridField(truth.spec(), std::move(values), truth.mask());
}

LevelData prepare_level(const EnsembleFields& ensemble, const GridField& observation, Level level) {
  if (ensemble.runs.empty()) throw ValidationError("empty ensemble");
  check_colocated({ensemble.runs.front(), observation});
  std::vector<GridField> runs;
  runs.reserve(ensemble.runs.size());
  for (const auto& r : ensemble.runs) runs.push_back(aggregate(r, level));
  return assemble(runs, aggregate(observation, level), ensemble, level_name(level), nullptr);
}

LevelData prepare_subsample(const EnsembleFields& ensemble, const GridField& observation, std::size_t k,
                            std::uint64_t seed) {
  if (ensemble.runs.empty()) throw ValidationError("empty ensemble");
  check_colocated({ensemble.runs.front(), observation});
  const auto all = support(observation);
  if (k == 0 || k > all.size())
    throw ValidationError(fmt::format("subsample size {} outside [1, {}]", k, all.size()));
  std::vector<GridIndex> cells;
  for (std::size_t pos : subsample_positions(all.size(), k, seed)) cells.push_back(all[pos]);
  return assemble(ensemble.runs, observation, ensemble, fmt::format("subsample{}", k), &cells);
}

std::string PriorChoice::label() const { return fmt::format("bnu{}_bz{}", b_nu, b_z); }

std::vector<PriorChoice> parse_prior_list(const std::string& text) {
  std::vector<PriorChoice> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ValidationError(fmt::format("prior '{}' is not of the form b_nu:b_z", item));
    PriorChoice c{parse_double(item.substr(0, colon), "b_nu"), parse_double(item.substr(colon + 1), "b_z")};
    if (!(c.b_nu > 0.0) || !(c.b_z > 0.0)) throw ValidationError(fmt::format("prior scales in '{}' must be positive", item));
    out.push_back(c);
  }
  if (out.empty()) throw ValidationError("empty prior list");
  return out;
}

PriorSpec make_priors(const CalibrationSettings& settings, const PriorChoice& choice, const Eigen::VectorXd& sills) {
  PriorSpec p;
  p.theta_lower = settings.theta_lower;
  p.theta_upper = settings.theta_upper;
  p.a_nu = settings.a_nu;
  p.b_nu = choice.b_nu;
  p.a_z = settings.a_z;
  p.b_z = choice.b_z;
  p.anchor_sills(sills, settings.kappa_y_shape);
  return p;
}

LevelModel build_level_model(LevelData data, const CalibrationSettings& settings) {
  LevelModel m;
  m.emulator = PcEmulator::fit(data.design, settings.emulator);
  m.discrepancy = build_discrepancy(data.grid, data.cells, settings.discrepancy);
  const Eigen::Index n = data.design.dimension();
  const Eigen::Index room = n - m.emulator.components();
  if (m.discrepancy.components() > room) {
    spdlog::warn("{}: {} discrepancy components do not fit beside {} emulator components at {} locations; keeping {}",
                 data.label, m.discrepancy.components(), m.emulator.components(), n, room);
    m.discrepancy.truncated.basis = m.discrepancy.truncated.basis.leftCols(room).eval();
  }
  m.reduced = reduce_observation(data.observation, m.emulator.basis(), m.discrepancy.basis(),
                                 m.emulator.column_means(), settings.max_condition);
  spdlog::info("{}: n = {}, J_y = {}, J_d = {} of {} knots, condition {:.3g}", data.label, n,
               m.emulator.components(), m.discrepancy.components(), m.discrepancy.knots.size(),
               m.reduced.condition_number);
  m.data = std::move(data);
  return m;
}

CalibrationRun calibrate_model(const LevelModel& model, const CalibrationSettings& settings,
                               const PriorChoice& choice, std::uint64_t seed) {
  CalibrationRun run;
  run.label = choice.label();
  run.priors = make_priors(settings, choice, model.emulator.sills());
  McmcConfig mc = settings.mcmc;
  mc.seed = seed;
  run.chain = run_mcmc(model.reduced, model.emulator, run.priors, mc);
  for (Eigen::Index k = 0; k < run.priors.theta_lower.size(); ++k) {
    if (!run.priors.is_free(k)) continue;
    const auto& name = model.emulator.parameter_names()[static_cast<std::size_t>(k)];
    const auto draws = run.chain.draws("theta." + name);
    run.density_parameters.push_back(name);
    run.densities.push_back(
        kde(draws, run.priors.theta_lower(k), run.priors.theta_upper(k), settings.density_points));
  }
  return run;
}

Interval density_interval(const DensityTable& table, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("interval level must lie in (0, 1)");
  const Eigen::Index m = table.grid.size();
  Eigen::VectorXd cdf(m);
  cdf(0) = 0.0;
  for (Eigen::Index i = 1; i < m; ++i)
    cdf(i) = cdf(i - 1) + 0.5 * (table.grid(i) - table.grid(i - 1)) * (table.density(i) + table.density(i - 1));
  const double total = cdf(m - 1);
  if (!(total > 0.0)) throw ValidationError("density has no mass");
  auto invert = [&](double prob) {
    const double target = prob * total;
    for (Eigen::Index i = 1; i < m; ++i)
      if (cdf(i) >= target) {
        const double span = cdf(i) - cdf(i - 1);
        const double t = span > 0.0 ? (target - cdf(i - 1)) / span : 0.0;
        return table.grid(i - 1) + t * (table.grid(i) - table.grid(i - 1));
      }
    return table.grid(m - 1);
  };
  const double tail = 0.5 * (1.0 - level);
  return {invert(tail), invert(1.0 - tail)};
}

SensitivityReport prior_sensitivity_report(const std::vector<DensityTable>& densities,
                                           std::vector<std::string> labels) {
  const auto m = densities.size();
  if (m < 2) throw ValidationError("a sensitivity report needs at least two densities");
  if (labels.size() != m) throw ValidationError("one label per density is required");
  SensitivityReport r;
  r.labels = std::move(labels);
  r.l1 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  double total = 0.0;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const double d = l1_distance(densities[a], densities[b]);
      r.l1(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = d;
      r.l1(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = d;
      total += d;
    }
  r.divergence = total / static_cast<double>(m * (m - 1) / 2);
  r.mixture.grid = densities.front().grid;
  r.mixture.density = Eigen::VectorXd::Zero(r.mixture.grid.size());
  for (const auto& d : densities) {
    r.modes.push_back(density_mode(d));
    r.intervals.push_back(density_interval(d));
    r.mixture.density += d.density / static_cast<double>(m);
  }
  return r;
}

std::vector<LevelStudy> aggregation_study(const EnsembleFields& ensemble, const GridField& pseudo_obs,
                                          const std::vector<Level>& levels, const std::vector<PriorChoice>& priors,
                                          const CalibrationSettings& settings, int threads) {
  if (levels.empty() || priors.empty()) throw ValidationError("a study needs at least one level and one prior");
  CalibrationSettings s = settings;
  s.emulator.threads = threads;
  std::vector<LevelModel> models;
  for (Level level : levels) models.push_back(build_level_model(prepare_level(ensemble, pseudo_obs, level), s));

  const std::size_t np = priors.size();
  std::vector<CalibrationRun> runs(levels.size() * np);
  parallel_for(runs.size(), threads, [&](std::size_t t) {
    const std::size_t l = t / np;
    const std::size_t p = t % np;
    runs[t] = calibrate_model(models[l], settings, priors[p], derive_seed(settings.mcmc.seed, t));
  });

  std::vector<LevelStudy> out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    LevelStudy st;
    st.level = levels[l];
    st.locations = models[l].data.design.dimension();
    st.j_y = models[l].emulator.components();
    st.j_d = models[l].discrepancy.components();
    st.condition_number = models[l].reduced.condition_number;
    for (std::size_t p = 0; p < np; ++p) st.runs.push_back(std::move(runs[l * np + p]));
    if (np >= 2 && !st.runs.front().densities.empty()) {
      std::vector<DensityTable> d;
      std::vector<std::string> labels;
      for (const auto& r : st.runs) {
        d.push_back(r.densities.front());
        labels.push_back(r.label);
      }
      st.report = prior_sensitivity_report(d, labels);
    }
    out.push_back(std::move(st));
  }
  return out;
}

SubsampleStudy subsample_study(const EnsembleFields& ensemble, const GridField& pseudo_obs, std::size_t k,
                               int repeats, std::uint64_t seed, const CalibrationSettings& settings,
                               const PriorChoice& prior, int threads) {
  if (repeats < 2) throw ValidationError("a subsampling study needs at least two repeats");
  SubsampleStudy st;
  st.k = k;
  st.runs.resize(static_cast<std::size_t>(repeats));
  CalibrationSettings s = settings;
  s.emulator.threads = 1;
  parallel_for(st.runs.size(), threads, [&](std::size_t r) {
    const auto model = build_level_model(prepare_subsample(ensemble, pseudo_obs, k, derive_seed(seed, r)), s);
    st.runs[r] = calibrate_model(model, s, prior, derive_seed(settings.mcmc.seed, r));
    st.runs[r].label = fmt::format("repeat{}", r);
  });
  for (const auto& run : st.runs) {
    if (run.densities.empty()) throw ValidationError("no free parameter to study");
    st.modes.push_back(density_mode(run.densities.front()));
    st.mc_standard_errors.push_back(batch_means_se(run.chain.draws("theta." + run.density_parameters.front())));
  }
  st.mode_sd = sample_sd(st.modes);
  st.mean_mc_se = sample_mean(st.mc_standard_errors);
  st.spread_ratio = st.mean_mc_se > 0.0 ? st.mode_sd / st.mean_mc_se : std::numeric_limits<double>::infinity();
  return st;
}

double CvResult::fraction_outside(double bound) const {
  if (whitened.empty()) return 0.0;
  const auto count = std::count_if(whitened.begin(), whitened.end(), [&](double e) { return std::abs(e) > bound; });
  return static_cast<double>(count) / static_cast<double>(whitened.size());
}

CvResult cross_validate(const EnsembleDesign& design, const EmulatorOptions& options, double holdout_fraction,
                        int rounds, std::uint64_t seed) {
  const Eigen::Index p = design.runs();
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ValidationError(fmt::format("holdout fraction {} outside (0, 1)", holdout_fraction));
  const auto m = static_cast<Eigen::Index>(std::floor(holdout_fraction * static_cast<double>(p) + 1e-9));
  if (m < 1) throw ValidationError(fmt::format("holding out {} of {} runs leaves an empty fold", holdout_fraction, p));
  if (p - m < 3) throw ValidationError(fmt::format("only {} runs would remain for fitting", p - m));
  if (rounds < 1) throw ValidationError("cross-validation needs at least one round");

  const Eigen::MatrixXd raw = design.centered.rowwise() + design.column_means.transpose();
  CvResult out;
  for (int round = 0; round < rounds; ++round) {
    const auto held = subsample_positions(static_cast<std::size_t>(p), static_cast<std::size_t>(m),
                                          derive_seed(seed, static_cast<std::uint64_t>(round)));
    std::vector<Eigen::Index> keep;
    CvRound cr;
    for (Eigen::Index i = 0, h = 0; i < p; ++i) {
      if (h < m && static_cast<Eigen::Index>(held[static_cast<std::size_t>(h)]) == i) {
        cr.held_out.push_back(i);
        ++h;
      } else {
        keep.push_back(i);
      }
    }
    const auto fit_design =
        EnsembleDesign::from_raw(design.parameter_names, design.thetas(keep, Eigen::all), raw(keep, Eigen::all));
    const PcEmulator emu = PcEmulator::fit(fit_design, options);

    const Eigen::MatrixXd held_raw = raw(cr.held_out, Eigen::all);
    const Eigen::MatrixXd held_centered = held_raw.rowwise() - emu.column_means().transpose();
    const Eigen::MatrixXd truth_scores = project_rows(emu.basis(), held_centered);
    Eigen::MatrixXd unit(m, design.thetas.cols());
    for (Eigen::Index i = 0; i < m; ++i) unit.row(i) = emu.to_unit(design.thetas.row(cr.held_out[static_cast<std::size_t>(i)]).transpose());

    Eigen::MatrixXd pred_scores(m, emu.components());
    for (Eigen::Index j = 0; j < emu.components(); ++j) {
      Eigen::VectorXd mean;
      Eigen::MatrixXd cov;
      emu.component(j).predict_joint(unit, mean, cov);
      pred_scores.col(j) = mean;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success)
        throw NumericalError(fmt::format("round {}: predictive covariance of component {} is singular", round, j));
      const Eigen::VectorXd w = llt.matrixL().solve(truth_scores.col(j) - mean);
      out.whitened.insert(out.whitened.end(), w.data(), w.data() + w.size());
    }
    const Eigen::MatrixXd pred_fields =
        (pred_scores * emu.basis().K.transpose()).rowwise() + emu.column_means().transpose();
    cr.rmse = std::sqrt((pred_fields - held_raw).squaredNorm() / static_cast<double>(held_raw.size()));
    spdlog::info("cv round {}: rmse {:.6g}", round, cr.rmse);
    out.rounds.push_back(std::move(cr));
  }
  return out;
}

ProjectionTable ProjectionTable::read_csv(const std::filesystem::path& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path, true);
  if (m.cols() != 2) throw ValidationError(fmt::format("projection table '{}' must have two columns", path.string()));
  ProjectionTable t;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    t.theta.push_back(m(i, 0));
    t.response.push_back(m(i, 1));
  }
  t.validate();
  return t;
}

void ProjectionTable::validate() const {
  if (theta.size() < 2 || theta.size() != response.size())
    throw ValidationError("a projection table needs at least two rows");
  for (std::size_t i = 1; i < theta.size(); ++i)
    if (!(theta[i] > theta[i - 1])) throw ValidationError("projection table parameter values must strictly increase");
}

double ProjectionTable::operator()(double x) const {
  if (x <= theta.front()) return response.front();
  if (x >= theta.back()) return response.back();
  const auto it = std::upper_bound(theta.begin(), theta.end(), x);
  const auto i = static_cast<std::size_t>(it - theta.begin());
  const double t = (x - theta[i - 1]) / (theta[i] - theta[i - 1]);
  return response[i - 1] + t * (response[i] - response[i - 1]);
}

ProjectionResult project_response(std::span<const double> theta_draws, const ProjectionTable& table, int points) {
  table.validate();
  if (theta_draws.empty()) throw ValidationError("no posterior draws to project");
  ProjectionResult r;
  r.values.reserve(theta_draws.size());
  for (double x : theta_draws) {
    if (x < table.theta.front() || x > table.theta.back()) ++r.clamped;
    r.values.push_back(table(x));
  }
  if (r.clamped > 0) spdlog::warn("{} draws fall outside the projection table and were clamped", r.clamped);
  r.density = kde_auto_range(r.values, points);
  r.interval = equal_tailed_interval(r.values);
  return r;
}

}  // namespace pccal
