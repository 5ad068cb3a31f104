#include <doctest.h>

#include <fstream>

#include "pccal/errors.hpp"
#include "pccal/field_io.hpp"
#include "support.hpp"

using namespace pccal;
namespace fs = std::filesystem;

TEST_CASE("field CSV round-trips values, mask and volumes exactly") {
  const auto dir = testing::scratch_dir("field_io");
  GridSpec spec({0.0, 120.0, 240.0}, {-30.0, 30.0}, {10.0, 500.0},
                {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0});
  std::vector<double> values = {0.1, 1.0 / 3.0, -2.5, 7.0, 1e-300, 3.0, 0.0, 0.0, 4.0, 5.0, 6.0, 6.0};
  std::vector<std::uint8_t> mask = {1, 1, 1, 1, 1, 1, 1, 0, 1, 1, 1, 1};
  const GridField f(spec, values, mask);
  write_field_csv(dir / "f.csv", f);
  const auto g = read_field_csv(dir / "f.csv");
  CHECK(g.spec().same_coordinates(spec));
  CHECK(g.mask() == mask);
  for (std::size_t c = 0; c < values.size(); ++c)
    if (mask[c]) {
      CHECK(g.values()[c] == values[c]);
      CHECK(g.spec().cell_volumes()[c] == spec.cell_volumes()[c]);
    }
  fs::remove_all(dir);
}

TEST_CASE("field CSV without a volume column gets unit volumes") {
  const auto dir = testing::scratch_dir("field_io");
  std::ofstream(dir / "f.csv") << "lon,lat,depth,value\n0,0,5,1.5\n10,0,5,2.5\n";
  const auto g = read_field_csv(dir / "f.csv");
  CHECK(g.valid_count() == 2);
  CHECK(g.spec().cell_volumes()[1] == 1.0);
  fs::remove_all(dir);
}

TEST_CASE("malformed field files are validation errors") {
  const auto dir = testing::scratch_dir("field_io");
  std::ofstream(dir / "a.csv") << "lon,lat,value\n0,0,1\n";
  std::ofstream(dir / "b.csv") << "lon,lat,depth,value\n0,0,5,abc\n";
  std::ofstream(dir / "c.csv") << "lon,lat,depth,value\n0,0,5,1\n0,0,5,2\n";
  std::ofstream(dir / "d.csv") << "lon,lat,depth,value\n0,0,5\n";
  for (const char* name : {"a.csv", "b.csv", "c.csv", "d.csv", "missing.csv"})
    CHECK_THROWS_AS(read_field_csv(dir / name), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("ensemble manifest stores field paths relative to itself") {
  const auto dir = testing::scratch_dir("manifest");
  fs::create_directories(dir / "runs");
  GridSpec spec({0.0, 1.0}, {0.0}, {0.0});
  EnsembleManifest m;
  m.parameter_names = {"a", "b"};
  m.thetas.resize(2, 2);
  m.thetas << 0.1, 1.0, 0.2, 2.0;
  for (int i = 0; i < 2; ++i) {
    const auto p = dir / "runs" / ("r" + std::to_string(i) + ".csv");
    write_field_csv(p, GridField(spec, {1.0 * i, 2.0}, {1, 1}));
    m.field_paths.push_back(p);
  }
  write_ensemble_manifest(dir / "manifest.json", m);
  std::ifstream in(dir / "manifest.json");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("\"runs/r0.csv\"") != std::string::npos);

  const auto back = read_ensemble_manifest(dir / "manifest.json");
  CHECK(back.parameter_names == m.parameter_names);
  CHECK(back.thetas == m.thetas);
  const auto ens = load_ensemble(back);
  CHECK(ens.runs.size() == 2);
  CHECK(ens.runs[1].values()[0] == 1.0);
  fs::remove_all(dir);
}

TEST_CASE("co-location check rejects differing masks") {
  GridSpec spec({0.0, 1.0}, {0.0}, {0.0});
  CHECK_NOTHROW(check_colocated({GridField(spec, {1, 2}, {1, 1}), GridField(spec, {3, 4}, {1, 1})}));
  CHECK_THROWS_AS(check_colocated({GridField(spec, {1, 2}, {1, 1}), GridField(spec, {3, 4}, {1, 0})}),
                  ValidationError);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -1e-17, 6.02214076e23, 2.0})
    CHECK(parse_double(format_double(v), "x") == v);
  CHECK_THROWS_AS(parse_double("1.5x", "x"), ValidationError);
}
