#include <doctest.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pccal/cli.hpp"
#include "pccal/config.hpp"
#include "pccal/errors.hpp"
#include "pccal/synthetic.hpp"
#include "support.hpp"

using namespace pccal;
namespace fs = std::filesystem;

namespace {

/// Captures std::cout and std::cerr for the lifetime of the object.
struct Capture {
  std::stringstream out, err;
  std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
  ~Capture() {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
  }
};

struct Workspace {
  fs::path dir = testing::scratch_dir("cli");
  Workspace() {
    BenchmarkSpec spec;
    spec.nlon = 8;
    spec.nlat = 6;
    spec.runs = 8;
    const auto bench = make_benchmark(spec);
    write_benchmark(dir / "bench", bench, synthetic_observation(bench, 1));
  }
  ~Workspace() { fs::remove_all(dir); }

  fs::path config(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
};

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(const std::string& command, const fs::path& config, bool dry_run = false) {
  cli::Options o;
  o.command = command;
  o.config = config;
  o.dry_run = dry_run;
  Result r;
  {
    Capture cap;
    r.code = cli::run(o);
    r.out = cap.out.str();
    r.err = cap.err.str();
  }
  return r;
}

}  // namespace

TEST_CASE("config parsing: comments, whitespace and typed access") {
  std::stringstream in("# header\n a = 1.5 \nb=2 # trailing\n\nflag = yes\nlist = 1, 2,3\n");
  const auto cfg = KeyValueConfig::parse(in);
  CHECK(cfg.get_double("a", 0) == 1.5);
  CHECK(cfg.get_int("b", 0) == 2);
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_doubles("list") == std::vector<double>{1, 2, 3});
  CHECK(cfg.get_double("missing", 7.0) == 7.0);
  CHECK_THROWS_AS(cfg.require("missing"), ValidationError);
  CHECK_THROWS_AS(cfg.get_int("a", 0), ValidationError);
  CHECK_THROWS_AS(cfg.get_bool("a", false), ValidationError);
}

TEST_CASE("config parsing rejects duplicates, bare lines and unknown keys") {
  std::stringstream dup("a = 1\na = 2\n"), bare("a\n"), ok("a = 1\nprior.theta.x = 0, 1\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(dup), ValidationError);
  CHECK_THROWS_AS(KeyValueConfig::parse(bare), ValidationError);
  const auto cfg = KeyValueConfig::parse(ok);
  CHECK_NOTHROW(cfg.check_known({"a"}, {"prior.theta."}));
  CHECK_THROWS_AS(cfg.check_known({"a"}, {}), ValidationError);
  CHECK_THROWS_AS(parse_number_list("1,x", "k"), ValidationError);
}

TEST_CASE("relative config paths resolve against the config directory") {
  const auto dir = testing::scratch_dir("cfg");
  std::ofstream(dir / "c.cfg") << "ensemble.manifest = bench/manifest.json\nabs = /tmp/x\n";
  const auto cfg = KeyValueConfig::read(dir / "c.cfg");
  CHECK(*cfg.get_path("ensemble.manifest") == dir / "bench/manifest.json");
  CHECK(*cfg.get_path("abs") == fs::path("/tmp/x"));
  fs::remove_all(dir);
}

TEST_CASE("missing manifest is a validation error naming the key") {
  Workspace ws;
  const auto r = run("emulate", ws.config("a.cfg", "ensemble.manifest = nowhere.json\nemulator.dir = out\n"));
  CHECK(r.code == cli::kExitValidation);
  const auto err = nlohmann::json::parse(r.err);
  CHECK(err["error"] == "validation");
  CHECK(err["message"].get<std::string>().find("ensemble.manifest") != std::string::npos);
  CHECK(!fs::exists(ws.dir / "out"));
}

TEST_CASE("unknown settings and bad values fail before any output") {
  Workspace ws;
  const auto r = run("emulate", ws.config("a.cfg", "ensemble.manifest = bench/manifest.json\nemulator.typo = 1\n"));
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("emulator.typo") != std::string::npos);
  const auto cal = ws.config("b.cfg",
                             "emulator.dir = emu\nobservation.field = bench/observation.csv\nmcmc.iterations = 0\n"
                             "out.dir = cal\n");
  fs::create_directories(ws.dir / "emu");
  CHECK(run("calibrate", cal).code == cli::kExitValidation);
  CHECK(!fs::exists(ws.dir / "cal"));
}

TEST_CASE("unknown study selector lists the valid ones") {
  Workspace ws;
  const auto cfg = ws.config("s.cfg",
                             "ensemble.manifest = bench/manifest.json\nobservation.field = bench/observation.csv\n"
                             "study.selector = bogus\nstudy.truth_theta = 0.1\nout.dir = study\n");
  const auto r = run("study", cfg);
  CHECK(r.code == cli::kExitValidation);
  const auto msg = nlohmann::json::parse(r.err)["message"].get<std::string>();
  for (const auto& s : cli::kStudySelectors) CHECK(msg.find(s) != std::string::npos);
}

TEST_CASE("dry run prints the plan and writes nothing") {
  Workspace ws;
  const auto cfg = ws.config("e.cfg", "ensemble.manifest = bench/manifest.json\nemulator.dir = emu\n"
                                      "emulator.components = 2\ncv.holdout_fraction = 0.25\n");
  const auto r = run("emulate", cfg, true);
  REQUIRE(r.code == cli::kExitOk);
  const auto plan = nlohmann::json::parse(r.out);
  CHECK(plan["command"] == "emulate");
  CHECK(!fs::exists(ws.dir / "emu"));
}

TEST_CASE("emulate then calibrate produces the documented outputs") {
  Workspace ws;
  const auto e = ws.config("e.cfg", "ensemble.manifest = bench/manifest.json\nemulator.dir = emu\n"
                                    "emulator.components = 2\nemulator.restarts = 2\n"
                                    "cv.holdout_fraction = 0.25\ncv.rounds = 2\n");
  REQUIRE(run("emulate", e).code == cli::kExitOk);
  for (const char* f : {"manifest.json", "K_y.csv", "scores.csv", "support.csv", "cv_report.json"})
    CHECK(fs::exists(ws.dir / "emu" / f));
  const auto c = ws.config("c.cfg", "emulator.dir = emu\nobservation.field = bench/observation.csv\n"
                                    "out.dir = cal\nmcmc.iterations = 600\nmcmc.warmup = 200\n"
                                    "discrepancy.components = 2\n");
  REQUIRE(run("calibrate", c).code == cli::kExitOk);
  for (const char* f : {"chain.csv", "report.json", "densities/theta.K_bg.csv", "discrepancy/knots.csv"})
    CHECK(fs::exists(ws.dir / "cal" / f));
  const auto report = nlohmann::json::parse(std::ifstream(ws.dir / "cal" / "report.json"));
  CHECK(report.contains("acceptance"));
  CHECK(report.contains("split_half"));
}

TEST_CASE("command line parse errors exit with the validation code") {
  std::vector<std::string> args = {"pccal", "emulate", "--threads", "0", "--config", "/nonexistent.cfg"};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  int code = 0;
  {
    Capture cap;
    code = cli::main_entry(static_cast<int>(argv.size()), argv.data());
  }
  CHECK(code == cli::kExitValidation);
}
