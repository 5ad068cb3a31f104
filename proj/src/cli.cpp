#include "pccal/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <variant>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pccal/config.hpp"
#include "pccal/emulator_io.hpp"
#include "pccal/errors.hpp"
#include "pccal/experiments.hpp"

namespace pccal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "ensemble.manifest", "observation.field", "emulator.dir", "out.dir",
    "emulator.variance_fraction", "emulator.components", "emulator.restarts", "emulator.seed",
    "emulator.min_relative_nugget", "emulator.max_iterations",
    "discrepancy.lat_step", "discrepancy.lon_step", "discrepancy.depth_step", "discrepancy.phi_surface",
    "discrepancy.phi_depth", "discrepancy.variance_fraction", "discrepancy.components", "discrepancy.scaled",
    "prior.a_nu", "prior.b_nu", "prior.a_z", "prior.b_z", "prior.kappa_y_shape",
    "mcmc.iterations", "mcmc.burn_in", "mcmc.seed", "mcmc.adapt", "mcmc.warmup", "mcmc.sample_kappa_y",
    "mcmc.step.theta", "mcmc.step.log_sigma2", "mcmc.step.log_kappa_d", "mcmc.step.log_kappa_y",
    "calibrate.max_condition", "density.points",
    "study.selector", "study.levels", "study.priors", "study.truth_theta", "study.residual_thetas",
    "study.subsample_k", "study.subsample_fraction", "study.repeats", "study.seed",
    "cv.holdout_fraction", "cv.rounds", "cv.seed",
    "project.chain", "project.table", "project.parameter",
};
const std::vector<std::string> kKnownPrefixes = {"prior.theta."};

class Stage {
 public:
  explicit Stage(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~Stage() {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    spdlog::info("stage {}: {:.3f} s", name_, d.count());
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << doc.dump(2) << '\n';
}

void write_density_csv(const fs::path& path, const DensityTable& t) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << "grid,density\n";
  for (Eigen::Index i = 0; i < t.grid.size(); ++i)
    out << format_double(t.grid(i)) << ',' << format_double(t.density(i)) << '\n';
}

void write_cells_csv(const fs::path& path, const GridSpec& grid, const std::vector<GridIndex>& cells) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << "lon,lat,depth\n";
  for (const auto& c : cells) {
    const Coord x = grid.coord(c);
    out << format_double(x.lon) << ',' << format_double(x.lat) << ',' << format_double(x.depth) << '\n';
  }
}

json interval_json(const Interval& i) { return json::array({i.lower, i.upper}); }

fs::path require_existing(const KeyValueConfig& cfg, const std::string& key) {
  const auto p = cfg.get_path(key);
  if (!p) throw ValidationError(fmt::format("missing required setting '{}'", key));
  if (!fs::exists(*p)) throw ValidationError(fmt::format("setting '{}': path '{}' does not exist", key, p->string()));
  return *p;
}

fs::path output_dir(const Options& o, const KeyValueConfig& cfg, const std::string& fallback_key = "out.dir") {
  if (o.out) return *o.out;
  if (const auto p = cfg.get_path(fallback_key)) return *p;
  if (const auto p = cfg.get_path("out.dir")) return *p;
  throw ValidationError("no output directory: pass --out or set 'out.dir'");
}

EmulatorOptions emulator_options(const KeyValueConfig& cfg, int threads) {
  EmulatorOptions o;
  if (cfg.has("emulator.components") && cfg.has("emulator.variance_fraction"))
    throw ValidationError("set only one of 'emulator.components' and 'emulator.variance_fraction'");
  if (cfg.has("emulator.components")) {
    o.selection = BasisSelection::by_count(cfg.get_int("emulator.components", 1));
  } else {
    const double f = cfg.get_double("emulator.variance_fraction", 0.9);
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("'emulator.variance_fraction' must lie in (0, 1]");
    o.selection = BasisSelection::by_fraction(f);
  }
  o.fit.restarts = static_cast<int>(cfg.get_int("emulator.restarts", 8));
  o.fit.seed = static_cast<std::uint64_t>(cfg.get_int("emulator.seed", 1));
  o.fit.min_relative_nugget = cfg.get_double("emulator.min_relative_nugget", 1e-8);
  o.fit.max_iterations = static_cast<int>(cfg.get_int("emulator.max_iterations", 200));
  if (o.fit.restarts < 1) throw ValidationError("'emulator.restarts' must be at least 1");
  if (!(o.fit.min_relative_nugget > 0.0)) throw ValidationError("'emulator.min_relative_nugget' must be positive");
  if (o.fit.max_iterations < 1) throw ValidationError("'emulator.max_iterations' must be at least 1");
  o.threads = threads;
  return o;
}

DiscrepancySettings discrepancy_settings(const KeyValueConfig& cfg) {
  DiscrepancySettings d;
  d.lat_step = cfg.get_double("discrepancy.lat_step", d.lat_step);
  d.lon_step = cfg.get_double("discrepancy.lon_step", d.lon_step);
  d.depth_step = cfg.get_double("discrepancy.depth_step", d.depth_step);
  d.phi_surface_km = cfg.get_double("discrepancy.phi_surface", d.phi_surface_km);
  d.phi_depth_m = cfg.get_double("discrepancy.phi_depth", d.phi_depth_m);
  for (double v : {d.lat_step, d.lon_step, d.depth_step, d.phi_surface_km, d.phi_depth_m})
    if (!(v > 0.0)) throw ValidationError("discrepancy steps and ranges must be positive");
  const bool scaled = cfg.get_bool("discrepancy.scaled", true);
  if (cfg.has("discrepancy.components") && cfg.has("discrepancy.variance_fraction"))
    throw ValidationError("set only one of 'discrepancy.components' and 'discrepancy.variance_fraction'");
  if (cfg.has("discrepancy.components")) {
    d.selection = TruncationSelection::by_count(cfg.get_int("discrepancy.components", 1), scaled);
  } else {
    const double f = cfg.get_double("discrepancy.variance_fraction", 0.95);
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("'discrepancy.variance_fraction' must lie in (0, 1]");
    d.selection = TruncationSelection::by_fraction(f, scaled);
  }
  return d;
}

McmcConfig mcmc_config(const KeyValueConfig& cfg) {
  McmcConfig m;
  m.iterations = cfg.get_int("mcmc.iterations", m.iterations);
  m.burn_in_fraction = cfg.get_double("mcmc.burn_in", m.burn_in_fraction);
  m.seed = static_cast<std::uint64_t>(cfg.get_int("mcmc.seed", 1));
  m.adapt = cfg.get_bool("mcmc.adapt", m.adapt);
  m.warmup_window = cfg.get_int("mcmc.warmup", m.warmup_window);
  m.sample_kappa_y = cfg.get_bool("mcmc.sample_kappa_y", m.sample_kappa_y);
  m.scales.theta = cfg.get_double("mcmc.step.theta", m.scales.theta);
  m.scales.log_sigma2 = cfg.get_double("mcmc.step.log_sigma2", m.scales.log_sigma2);
  m.scales.log_kappa_d = cfg.get_double("mcmc.step.log_kappa_d", m.scales.log_kappa_d);
  m.scales.log_kappa_y = cfg.get_double("mcmc.step.log_kappa_y", m.scales.log_kappa_y);
  m.validate();
  return m;
}

/// Uniform bounds from `prior.theta.<name> = lo, hi`, defaulting to the design box.
void theta_bounds(const KeyValueConfig& cfg, const std::vector<std::string>& names, const Eigen::MatrixXd& thetas,
                  Eigen::VectorXd& lower, Eigen::VectorXd& upper) {
  const auto q = static_cast<Eigen::Index>(names.size());
  lower = thetas.colwise().minCoeff().transpose();
  upper = thetas.colwise().maxCoeff().transpose();
  std::set<std::string> known(names.begin(), names.end());
  for (const auto& key : cfg.keys_with_prefix("prior.theta.")) {
    const std::string name = key.substr(std::string("prior.theta.").size());
    if (!known.count(name)) throw ValidationError(fmt::format("setting '{}' names an unknown parameter", key));
  }
  for (Eigen::Index k = 0; k < q; ++k) {
    const std::string key = "prior.theta." + names[static_cast<std::size_t>(k)];
    if (!cfg.has(key)) continue;
    const auto v = cfg.get_doubles(key);
    if (v.size() != 2 || !(v[1] >= v[0]))
      throw ValidationError(fmt::format("setting '{}' must be 'lo, hi' with lo <= hi", key));
    lower(k) = v[0];
    upper(k) = v[1];
  }
}

CalibrationSettings calibration_settings(const KeyValueConfig& cfg, const std::vector<std::string>& names,
                                         const Eigen::MatrixXd& thetas, int threads) {
  CalibrationSettings s;
  s.emulator = emulator_options(cfg, threads);
  s.discrepancy = discrepancy_settings(cfg);
  theta_bounds(cfg, names, thetas, s.theta_lower, s.theta_upper);
  s.a_nu = cfg.get_double("prior.a_nu", 2.0);
  s.a_z = cfg.get_double("prior.a_z", 2.0);
  s.kappa_y_shape = cfg.get_double("prior.kappa_y_shape", 5.0);
  for (double v : {s.a_nu, s.a_z, s.kappa_y_shape})
    if (!(v > 0.0)) throw ValidationError("prior shapes must be positive");
  s.mcmc = mcmc_config(cfg);
  s.density_points = static_cast<int>(cfg.get_int("density.points", 512));
  if (s.density_points < 2) throw ValidationError("'density.points' must be at least 2");
  s.max_condition = cfg.get_double("calibrate.max_condition", 1e10);
  if (!(s.max_condition > 1.0)) throw ValidationError("'calibrate.max_condition' must exceed 1");
  return s;
}

PriorChoice prior_choice(const KeyValueConfig& cfg) {
  PriorChoice c{cfg.get_double("prior.b_nu", 2.0), cfg.get_double("prior.b_z", 2.0)};
  if (!(c.b_nu > 0.0) || !(c.b_z > 0.0)) throw ValidationError("prior scales must be positive");
  return c;
}

/// Vectorized design on the valid cells of the first run.
struct DesignData {
  EnsembleFields fields;
  std::vector<GridIndex> cells;
  EnsembleDesign design;
};

DesignData load_design(const fs::path& manifest_path) {
  DesignData d;
  d.fields = load_ensemble(read_ensemble_manifest(manifest_path));
  d.cells = support(d.fields.runs.front());
  Eigen::MatrixXd outputs(static_cast<Eigen::Index>(d.fields.runs.size()), static_cast<Eigen::Index>(d.cells.size()));
  for (std::size_t r = 0; r < d.fields.runs.size(); ++r)
    outputs.row(static_cast<Eigen::Index>(r)) = vectorize(d.fields.runs[r]).values.transpose();
  d.design = EnsembleDesign::from_raw(d.fields.parameter_names, d.fields.thetas, outputs);
  return d;
}

// ---- emulate ---------------------------------------------------------------

struct EmulatePlan {
  DesignData data;
  EmulatorOptions options;
  double cv_fraction = 0.1;
  int cv_rounds = 5;
  std::uint64_t cv_seed = 1;
  fs::path out;
};

EmulatePlan plan_emulate(const Options& o, const KeyValueConfig& cfg) {
  EmulatePlan p;
  p.options = emulator_options(cfg, o.threads);
  p.cv_fraction = cfg.get_double("cv.holdout_fraction", 0.1);
  p.cv_rounds = static_cast<int>(cfg.get_int("cv.rounds", 5));
  p.cv_seed = static_cast<std::uint64_t>(cfg.get_int("cv.seed", 1));
  if (p.cv_rounds < 0) throw ValidationError("'cv.rounds' must be non-negative");
  p.out = output_dir(o, cfg, "emulator.dir");
  p.data = load_design(require_existing(cfg, "ensemble.manifest"));
  if (p.cv_rounds > 0 && std::floor(p.cv_fraction * static_cast<double>(p.data.design.runs()) + 1e-9) < 1.0)
    throw ValidationError("'cv.holdout_fraction' holds out no run; set cv.rounds = 0 to skip cross-validation");
  return p;
}

json cv_json(const CvResult& cv) {
  json rounds = json::array();
  for (const auto& r : cv.rounds) rounds.push_back({{"held_out", r.held_out}, {"rmse", r.rmse}});
  return {{"rounds", rounds},
          {"whitened_errors", cv.whitened.size()},
          {"fraction_outside_2", cv.fraction_outside(2.0)}};
}

void exec_emulate(const EmulatePlan& p) {
  PcEmulator emu;
  {
    Stage s("emulator fit");
    emu = PcEmulator::fit(p.data.design, p.options);
  }
  fs::create_directories(p.out);
  save_emulator(p.out, emu);
  write_cells_csv(p.out / "support.csv", p.data.fields.runs.front().spec(), p.data.cells);
  if (p.cv_rounds > 0) {
    Stage s("cross-validation");
    const auto cv = cross_validate(p.data.design, p.options, p.cv_fraction, p.cv_rounds, p.cv_seed);
    write_json(p.out / "cv_report.json", cv_json(cv));
  }
  spdlog::info("emulator: {} components, explained fraction {:.4f}", emu.components(), emu.basis().explained_fraction);
}

// ---- calibrate -------------------------------------------------------------

struct CalibratePlan {
  PcEmulator emulator;
  GridField observation;
  std::vector<GridIndex> cells;
  CalibrationSettings settings;
  PriorChoice prior;
  fs::path out;
};

void check_support(const fs::path& support_csv, const GridSpec& grid, const std::vector<GridIndex>& cells) {
  const Eigen::MatrixXd s = read_matrix_csv(support_csv, true);
  if (s.rows() != static_cast<Eigen::Index>(cells.size()) || s.cols() != 3)
    throw ValidationError(fmt::format("observation has {} valid cells but the emulator was built on {}", cells.size(), s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Coord c = grid.coord(cells[static_cast<std::size_t>(i)]);
    if (std::abs(c.lon - s(i, 0)) > 1e-9 || std::abs(c.lat - s(i, 1)) > 1e-9 || std::abs(c.depth - s(i, 2)) > 1e-9)
      throw ValidationError(fmt::format("observation cell {} is not co-located with the emulator support", i));
  }
}

CalibratePlan plan_calibrate(const Options& o, const KeyValueConfig& cfg) {
  CalibratePlan p;
  const fs::path emu_dir = require_existing(cfg, "emulator.dir");
  const fs::path obs_path = require_existing(cfg, "observation.field");
  p.out = output_dir(o, cfg);
  p.emulator = load_emulator(emu_dir);
  p.settings = calibration_settings(cfg, p.emulator.parameter_names(), p.emulator.thetas(), o.threads);
  p.prior = prior_choice(cfg);
  p.observation = read_field_csv(obs_path);
  p.cells = support(p.observation);
  check_support(emu_dir / "support.csv", p.observation.spec(), p.cells);
  make_priors(p.settings, p.prior, p.emulator.sills()).validate(p.emulator.parameters(), p.emulator.components());
  return p;
}

json summary_json(const CalibrationPosterior& chain) {
  json out = json::object();
  for (const auto& name : chain.column_names()) {
    const auto d = chain.draws(name);
    out[name] = {{"mean", sample_mean(d)},
                 {"sd", sample_sd(d)},
                 {"interval95", interval_json(equal_tailed_interval(d))},
                 {"mc_standard_error", d.size() >= 4 ? batch_means_se(d) : 0.0}};
  }
  return out;
}

json chain_json(const CalibrationPosterior& chain) {
  json acc = json::object();
  for (const auto& b : chain.blocks) acc[b.name] = {{"rate", b.rate()}, {"final_scale", b.final_scale}};
  json split = json::array();
  for (const auto& s : split_half(chain))
    split.push_back({{"parameter", s.parameter},
                     {"first_60pct", {{"mean", s.early_mean}, {"sd", s.early_sd}, {"interval95", {s.early_lower, s.early_upper}}}},
                     {"full", {{"mean", s.full_mean}, {"sd", s.full_sd}, {"interval95", {s.full_lower, s.full_upper}}}}});
  return {{"iterations", chain.iterations()},
          {"burn_in", chain.burn_in},
          {"seed", chain.seed},
          {"acceptance", acc},
          {"summary", summary_json(chain)},
          {"split_half", split}};
}

void exec_calibrate(const CalibratePlan& p) {
  LevelModel model;
  model.emulator = p.emulator;
  model.data.label = "calibrate";
  model.data.grid = p.observation.spec();
  model.data.cells = p.cells;
  model.data.observation = vectorize(p.observation).values;
  {
    Stage s("discrepancy basis");
    model.discrepancy = build_discrepancy(model.data.grid, model.data.cells, p.settings.discrepancy);
  }
  {
    Stage s("reduce observation");
    model.reduced = reduce_observation(model.data.observation, model.emulator.basis(), model.discrepancy.basis(),
                                       model.emulator.column_means(), p.settings.max_condition);
  }
  CalibrationRun run;
  {
    Stage s("mcmc");
    run = calibrate_model(model, p.settings, p.prior, p.settings.mcmc.seed);
  }
  fs::create_directories(p.out / "densities");
  fs::create_directories(p.out / "discrepancy");
  write_chain_csv(p.out / "chain.csv", run.chain);
  json params = json::object();
  for (std::size_t k = 0; k < run.densities.size(); ++k) {
    const auto& name = run.density_parameters[k];
    write_density_csv(p.out / "densities" / ("theta." + name + ".csv"), run.densities[k]);
    params[name] = {{"mode", density_mode(run.densities[k])},
                    {"interval95", interval_json(equal_tailed_interval(run.chain.draws("theta." + name)))},
                    {"bandwidth", run.densities[k].bandwidth}};
  }
  {
    std::ofstream out(p.out / "discrepancy" / "knots.csv");
    out << "lon,lat,depth\n";
    for (const auto& k : model.discrepancy.knots.knots)
      out << format_double(k.lon) << ',' << format_double(k.lat) << ',' << format_double(k.depth) << '\n';
  }
  write_matrix_csv(p.out / "discrepancy" / "K_d_pc.csv", model.discrepancy.basis());
  json report = chain_json(run.chain);
  report["parameters"] = params;
  report["components"] = {{"emulator", model.emulator.components()},
                          {"discrepancy", model.discrepancy.components()},
                          {"knots", model.discrepancy.knots.size()}};
  report["condition_number"] = model.reduced.condition_number;
  report["priors"] = {{"a_nu", run.priors.a_nu}, {"b_nu", run.priors.b_nu}, {"a_z", run.priors.a_z},
                      {"b_z", run.priors.b_z}, {"kappa_y_shape", run.priors.kappa_y_shape}};
  write_json(p.out / "report.json", report);
}

// ---- study -----------------------------------------------------------------

struct StudyPlan {
  EnsembleFields fields;
  GridField observation;
  PseudoObsConfig pseudo;
  std::string selector;
  std::vector<Level> levels;
  std::vector<PriorChoice> priors;
  CalibrationSettings settings;
  std::size_t k = 0;
  int repeats = 10;
  std::uint64_t seed = 1;
  int threads = 1;
  fs::path out;
};

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

StudyPlan plan_study(const Options& o, const KeyValueConfig& cfg) {
  StudyPlan p;
  p.selector = cfg.require("study.selector");
  if (std::find(kStudySelectors.begin(), kStudySelectors.end(), p.selector) == kStudySelectors.end())
    throw ValidationError(fmt::format("unknown study selector '{}' (valid: {})", p.selector, fmt::join(kStudySelectors, ", ")));
  const fs::path manifest = require_existing(cfg, "ensemble.manifest");
  const fs::path obs_path = require_existing(cfg, "observation.field");
  p.out = output_dir(o, cfg);
  p.threads = o.threads;
  std::stringstream levels(cfg.get("study.levels").value_or("3d,2d,1d"));
  for (std::string item; std::getline(levels, item, ',');) p.levels.push_back(parse_level(item));
  p.priors = parse_prior_list(cfg.get("study.priors").value_or("2:2,2:100,100:2,100:100"));
  p.repeats = static_cast<int>(cfg.get_int("study.repeats", 10));
  p.seed = static_cast<std::uint64_t>(cfg.get_int("study.seed", 1));
  p.fields = load_ensemble(read_ensemble_manifest(manifest));
  p.observation = read_field_csv(obs_path);
  check_colocated({p.fields.runs.front(), p.observation});
  p.settings = calibration_settings(cfg, p.fields.parameter_names, p.fields.thetas, o.threads);

  const auto truth = cfg.get_doubles("study.truth_theta");
  p.pseudo.truth_theta = to_vector(truth);
  std::stringstream res(cfg.get("study.residual_thetas").value_or(cfg.require("study.truth_theta")));
  for (std::string item; std::getline(res, item, ';');) p.pseudo.residual_thetas.push_back(to_vector(parse_number_list(item, "study.residual_thetas")));

  const std::size_t n = p.observation.valid_count();
  if (cfg.has("study.subsample_k")) {
    const long k = cfg.get_int("study.subsample_k", 0);
    if (k < 1) throw ValidationError("'study.subsample_k' must be positive");
    p.k = static_cast<std::size_t>(k);
  } else {
    const double f = cfg.get_double("study.subsample_fraction", 0.05);
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("'study.subsample_fraction' must lie in (0, 1]");
    p.k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
  }
  if (p.selector == "subsample") {
    if (p.k > n) throw ValidationError(fmt::format("'study.subsample_k' = {} exceeds the {} valid cells", p.k, n));
    if (p.repeats < 2) throw ValidationError("'study.repeats' must be at least 2");
  }
  // resolves the design points now so a missing run fails before any compute
  make_pseudo_obs(p.fields, p.observation, p.pseudo);
  for (const auto& pr : p.priors) make_priors(p.settings, pr, Eigen::VectorXd::Ones(1)).validate(p.settings.theta_lower.size(), 1);
  return p;
}

json run_json(const CalibrationRun& r) {
  json j = {{"label", r.label}, {"b_nu", r.priors.b_nu}, {"b_z", r.priors.b_z}};
  if (!r.densities.empty()) {
    j["mode"] = density_mode(r.densities.front());
    j["interval95"] = interval_json(density_interval(r.densities.front()));
  }
  j["acceptance"] = json::object();
  for (const auto& b : r.chain.blocks) j["acceptance"][b.name] = b.rate();
  return j;
}

void exec_study(const StudyPlan& p) {
  const GridField pseudo = make_pseudo_obs(p.fields, p.observation, p.pseudo);
  fs::create_directories(p.out / "densities");
  fs::create_directories(p.out / "chains");
  write_field_csv(p.out / "pseudo_obs.csv", pseudo);
  json report = {{"selector", p.selector}};
  if (p.selector == "aggregation") {
    std::vector<LevelStudy> studies;
    {
      Stage s("aggregation study");
      studies = aggregation_study(p.fields, pseudo, p.levels, p.priors, p.settings, p.threads);
    }
    json levels = json::array();
    for (const auto& st : studies) {
      json lj = {{"level", level_name(st.level)},
                 {"locations", st.locations},
                 {"J_y", st.j_y},
                 {"J_d", st.j_d},
                 {"condition_number", st.condition_number},
                 {"runs", json::array()}};
      for (const auto& r : st.runs) {
        const std::string stem = level_name(st.level) + "_" + r.label;
        write_chain_csv(p.out / "chains" / (stem + ".csv"), r.chain);
        if (!r.densities.empty()) write_density_csv(p.out / "densities" / (stem + ".csv"), r.densities.front());
        lj["runs"].push_back(run_json(r));
      }
      if (st.runs.size() >= 2 && !st.report.labels.empty()) {
        lj["divergence"] = st.report.divergence;
        std::vector<std::vector<double>> l1;
        for (Eigen::Index a = 0; a < st.report.l1.rows(); ++a) {
          l1.emplace_back();
          for (Eigen::Index b = 0; b < st.report.l1.cols(); ++b) l1.back().push_back(st.report.l1(a, b));
        }
        lj["pairwise_l1"] = l1;
        lj["mixture_mode"] = density_mode(st.report.mixture);
        lj["mixture_interval95"] = interval_json(density_interval(st.report.mixture));
        write_density_csv(p.out / "densities" / (level_name(st.level) + "_mixture.csv"), st.report.mixture);
      }
      levels.push_back(lj);
    }
    report["levels"] = levels;
  } else {
    SubsampleStudy st;
    {
      Stage s("subsample study");
      st = subsample_study(p.fields, pseudo, p.k, p.repeats, p.seed, p.settings, p.priors.front(), p.threads);
    }
    json runs = json::array();
    for (const auto& r : st.runs) {
      write_chain_csv(p.out / "chains" / (r.label + ".csv"), r.chain);
      write_density_csv(p.out / "densities" / (r.label + ".csv"), r.densities.front());
      runs.push_back(run_json(r));
    }
    report["k"] = st.k;
    report["runs"] = runs;
    report["modes"] = st.modes;
    report["mc_standard_errors"] = st.mc_standard_errors;
    report["mode_sd"] = st.mode_sd;
    report["mean_mc_standard_error"] = st.mean_mc_se;
    report["spread_ratio"] = st.spread_ratio;
  }
  write_json(p.out / "report.json", report);
}

// ---- cv ----------------------------------------------------------------------

void exec_cv(const EmulatePlan& p) {
  CvResult cv;
  {
    Stage s("cross-validation");
    cv = cross_validate(p.data.design, p.options, p.cv_fraction, p.cv_rounds, p.cv_seed);
  }
  fs::create_directories(p.out);
  write_json(p.out / "cv_report.json", cv_json(cv));
  Eigen::VectorXd w = to_vector(cv.whitened);
  write_matrix_csv(p.out / "whitened_errors.csv", w, {"whitened_error"});
}

// ---- project -----------------------------------------------------------------

struct ProjectPlan {
  std::vector<double> draws;
  ProjectionTable table;
  std::string parameter;
  fs::path out;
};

ProjectPlan plan_project(const Options& o, const KeyValueConfig& cfg) {
  ProjectPlan p;
  const fs::path chain_path = require_existing(cfg, "project.chain");
  const fs::path table_path = require_existing(cfg, "project.table");
  p.parameter = cfg.require("project.parameter");
  p.out = output_dir(o, cfg);
  const double burn = cfg.get_double("mcmc.burn_in", 0.2);
  if (!(burn >= 0.0 && burn < 1.0)) throw ValidationError("'mcmc.burn_in' must lie in [0, 1)");
  p.table = ProjectionTable::read_csv(table_path);

  std::ifstream in(chain_path);
  std::string header;
  std::getline(in, header);
  const auto cols = split_csv_line(header);
  const auto it = std::find(cols.begin(), cols.end(), "theta." + p.parameter);
  if (it == cols.end()) throw ValidationError(fmt::format("chain has no column 'theta.{}'", p.parameter));
  const auto c = static_cast<Eigen::Index>(it - cols.begin());
  const Eigen::MatrixXd chain = read_matrix_csv(chain_path, true);
  const auto skip = static_cast<Eigen::Index>(std::floor(burn * static_cast<double>(chain.rows())));
  for (Eigen::Index i = skip; i < chain.rows(); ++i) p.draws.push_back(chain(i, c));
  if (p.draws.empty()) throw ValidationError("chain has no draws after burn-in");
  return p;
}

void exec_project(const ProjectPlan& p) {
  const auto r = project_response(p.draws, p.table);
  fs::create_directories(p.out);
  write_density_csv(p.out / "projection_density.csv", r.density);
  write_json(p.out / "projection_report.json",
             {{"parameter", p.parameter},
              {"draws", r.values.size()},
              {"clamped", r.clamped},
              {"mean", sample_mean(r.values)},
              {"mode", density_mode(r.density)},
              {"interval95", interval_json(r.interval)}});
}

// ---- dispatch ----------------------------------------------------------------

using Plan = std::variant<EmulatePlan, CalibratePlan, StudyPlan, ProjectPlan>;

json describe(const std::string& command, const Plan& plan, const KeyValueConfig& cfg) {
  json d = {{"command", command}, {"settings", cfg.values()}};
  if (const auto* e = std::get_if<EmulatePlan>(&plan)) {
    const double p = static_cast<double>(e->data.design.runs());
    d["runs"] = e->data.design.runs();
    d["locations"] = e->data.design.dimension();
    d["output"] = e->out.string();
    d["cost"] = {{"fit_per_likelihood_evaluation_flops", p * p * p / 3.0},
                 {"cv_rounds", command == "emulate" || command == "cv" ? e->cv_rounds : 0}};
  } else if (const auto* c = std::get_if<CalibratePlan>(&plan)) {
    d["locations"] = c->cells.size();
    d["emulator_components"] = c->emulator.components();
    d["iterations"] = c->settings.mcmc.iterations;
    d["output"] = c->out.string();
  } else if (const auto* s = std::get_if<StudyPlan>(&plan)) {
    std::vector<std::string> levels;
    for (Level l : s->levels) levels.push_back(level_name(l));
    d["selector"] = s->selector;
    d["levels"] = levels;
    d["priors"] = s->priors.size();
    d["calibrations"] = s->selector == "aggregation" ? levels.size() * s->priors.size()
                                                    : static_cast<std::size_t>(s->repeats);
    d["locations"] = s->observation.valid_count();
    d["subsample_k"] = s->k;
    d["iterations_per_chain"] = s->settings.mcmc.iterations;
    d["output"] = s->out.string();
  } else if (const auto* pr = std::get_if<ProjectPlan>(&plan)) {
    d["draws"] = pr->draws.size();
    d["table_rows"] = pr->table.theta.size();
    d["output"] = pr->out.string();
  }
  return d;
}

Plan make_plan(const Options& o, const KeyValueConfig& cfg) {
  if (o.command == "emulate" || o.command == "cv") return plan_emulate(o, cfg);
  if (o.command == "calibrate") return plan_calibrate(o, cfg);
  if (o.command == "study") return plan_study(o, cfg);
  if (o.command == "project") return plan_project(o, cfg);
  throw ValidationError(fmt::format("unknown command '{}' (valid: emulate, calibrate, study, cv, project)", o.command));
}

void execute(const std::string& command, const Plan& plan) {
  if (command == "emulate") exec_emulate(std::get<EmulatePlan>(plan));
  else if (command == "cv") exec_cv(std::get<EmulatePlan>(plan));
  else if (command == "calibrate") exec_calibrate(std::get<CalibratePlan>(plan));
  else if (command == "study") exec_study(std::get<StudyPlan>(plan));
  else if (command == "project") exec_project(std::get<ProjectPlan>(plan));
}

void report_error(const std::string& kind, const std::string& message, const std::optional<fs::path>& out) {
  const json err = {{"error", kind}, {"message", message}};
  std::cerr << err.dump() << std::endl;
  if (out) {
    std::error_code ec;
    fs::create_directories(*out, ec);
    std::ofstream f(*out / "error.json");
    if (f) f << err.dump(2) << '\n';
  }
}

}  // namespace

int run(const Options& options) {
  if (options.threads < 1) {
    report_error("validation", "--threads must be at least 1", std::nullopt);
    return kExitValidation;
  }
  std::optional<fs::path> out;
  try {
    KeyValueConfig cfg = KeyValueConfig::read(options.config);
    cfg.check_known(kKnownKeys, kKnownPrefixes);
    if (options.seed) {
      for (const char* key : {"emulator.seed", "mcmc.seed", "study.seed", "cv.seed"})
        cfg.set(key, std::to_string(*options.seed));
    }
    Plan plan;
    {
      Stage s("validate");
      plan = make_plan(options, cfg);
    }
    if (options.dry_run) {
      std::cout << describe(options.command, plan, cfg).dump(2) << std::endl;
      return kExitOk;
    }
    std::visit([&](const auto& p) { out = p.out; }, plan);
    execute(options.command, plan);
    return kExitOk;
  } catch (const ValidationError& e) {
    report_error("validation", e.what(), std::nullopt);
    return kExitValidation;
  } catch (const NumericalError& e) {
    report_error("numerical", e.what(), out);
    return kExitNumerical;
  } catch (const std::exception& e) {
    report_error("internal", e.what(), out);
    return kExitInternal;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Reduced-dimension Bayesian calibration of spatial simulator output"};
  app.require_subcommand(1);
  Options o;
  std::string log_level = "info";
  for (const char* name : {"emulate", "calibrate", "study", "cv", "project"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", o.config, "key = value settings file")->required()->check(CLI::ExistingFile);
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { o.out = v; }, "output directory");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; },
                                             "overrides every configured seed");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--dry-run", o.dry_run, "print the resolved plan without computing");
    sub->add_option("--log-level", log_level, "trace, debug, info, warn, error")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  o.command = app.get_subcommands().front()->get_name();
  auto logger = spdlog::stderr_color_mt("pccal");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));
  return run(o);
}

}  // namespace pccal::cli
