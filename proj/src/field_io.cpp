#include "pccal/field_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "pccal/errors.hpp"

namespace pccal {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    const auto first = cell.find_first_not_of(' ');
    out.push_back(first == std::string::npos ? std::string{} : cell.substr(first));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& context) {
  if (text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size())
    throw ValidationError(fmt::format("{}: cannot parse '{}' as a number", context, text));
  return v;
}

GridField read_field_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open field file '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(fmt::format("field file '{}' is empty", path.string()));
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_lon = column("lon"), c_lat = column("lat"), c_depth = column("depth"),
            c_vol = column("volume"), c_val = column("value");
  if (c_lon < 0 || c_lat < 0 || c_depth < 0 || c_val < 0)
    throw ValidationError(fmt::format("field file '{}' needs columns lon,lat,depth,value", path.string()));

  struct Row {
    double lon, lat, depth, volume, value;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ValidationError(fmt::format("{}:{}: expected {} columns, found {}", path.string(), line_no,
                                        header.size(), cells.size()));
    const std::string ctx = fmt::format("{}:{}", path.string(), line_no);
    rows.push_back({parse_double(cells[c_lon], ctx), parse_double(cells[c_lat], ctx),
                    parse_double(cells[c_depth], ctx), c_vol >= 0 ? parse_double(cells[c_vol], ctx) : 1.0,
                    parse_double(cells[c_val], ctx)});
  }
  if (rows.empty()) throw ValidationError(fmt::format("field file '{}' has no rows", path.string()));

  auto axis = [&](auto proj) {
    std::vector<double> a;
    a.reserve(rows.size());
    for (const auto& r : rows) a.push_back(proj(r));
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
  };
  auto lons = axis([](const Row& r) { return r.lon; });
  auto lats = axis([](const Row& r) { return r.lat; });
  auto depths = axis([](const Row& r) { return r.depth; });
  auto pos = [](const std::vector<double>& a, double v) {
    return static_cast<int>(std::lower_bound(a.begin(), a.end(), v) - a.begin());
  };

  const std::size_t n = lons.size() * lats.size() * depths.size();
  std::vector<double> volumes(n, 1.0), values(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::uint8_t> mask(n, 0);
  GridSpec probe(lons, lats, depths);
  for (const auto& r : rows) {
    const auto flat = probe.flat_index({pos(lons, r.lon), pos(lats, r.lat), pos(depths, r.depth)});
    if (mask[flat])
      throw ValidationError(fmt::format("field file '{}' lists cell ({}, {}, {}) twice", path.string(),
                                        r.lon, r.lat, r.depth));
    mask[flat] = 1;
    volumes[flat] = r.volume;
    values[flat] = r.value;
  }
  GridSpec spec(std::move(lons), std::move(lats), std::move(depths), std::move(volumes));
  return GridField(std::move(spec), std::move(values), std::move(mask));
}

void write_field_csv(const fs::path& path, const GridField& field) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write field file '{}'", path.string()));
  out << "lon,lat,depth,volume,value\n";
  const GridSpec& spec = field.spec();
  for (std::size_t flat = 0; flat < spec.cell_count(); ++flat) {
    if (!field.valid(flat)) continue;
    const Coord c = spec.coord(spec.grid_index(flat));
    out << format_double(c.lon) << ',' << format_double(c.lat) << ',' << format_double(c.depth) << ','
        << format_double(spec.cell_volumes()[flat]) << ',' << format_double(field.values()[flat]) << '\n';
  }
}

EnsembleManifest read_ensemble_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open ensemble manifest '{}'", path.string()));
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("ensemble manifest '{}': {}", path.string(), e.what()));
  }
  EnsembleManifest m;
  try {
    m.parameter_names = doc.at("parameters").get<std::vector<std::string>>();
    const auto& runs = doc.at("runs");
    const auto q = static_cast<Eigen::Index>(m.parameter_names.size());
    if (q == 0) throw ValidationError("ensemble manifest lists no parameters");
    m.thetas.resize(static_cast<Eigen::Index>(runs.size()), q);
    Eigen::Index i = 0;
    for (const auto& run : runs) {
      const auto theta = run.at("theta").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(theta.size()) != q)
        throw ValidationError(fmt::format("run {} has {} parameter values, expected {}", i, theta.size(), q));
      for (Eigen::Index k = 0; k < q; ++k) m.thetas(i, k) = theta[static_cast<std::size_t>(k)];
      fs::path field = run.at("field").get<std::string>();
      if (field.is_relative()) field = path.parent_path() / field;
      m.field_paths.push_back(field);
      ++i;
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("ensemble manifest '{}': {}", path.string(), e.what()));
  }
  return m;
}

void write_ensemble_manifest(const fs::path& path, const EnsembleManifest& manifest) {
  json doc;
  doc["parameters"] = manifest.parameter_names;
  doc["runs"] = json::array();
  for (Eigen::Index i = 0; i < manifest.thetas.rows(); ++i) {
    std::vector<double> theta;
    for (Eigen::Index k = 0; k < manifest.thetas.cols(); ++k) theta.push_back(manifest.thetas(i, k));
    fs::path field = manifest.field_paths[static_cast<std::size_t>(i)];
    const fs::path base = fs::absolute(path).parent_path().lexically_normal();
    field = fs::absolute(field).lexically_normal().lexically_relative(base);
    doc["runs"].push_back({{"theta", theta}, {"field", field.generic_string()}});
  }
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write ensemble manifest '{}'", path.string()));
  out << doc.dump(2) << '\n';
}

void check_colocated(const std::vector<GridField>& fields) {
  for (std::size_t i = 1; i < fields.size(); ++i) {
    if (!fields[i].spec().same_coordinates(fields[0].spec()))
      throw ValidationError(fmt::format("field {} is on a different grid than field 0", i));
    if (fields[i].mask() != fields[0].mask())
      throw ValidationError(fmt::format("field {} has a different mask than field 0", i));
  }
}

EnsembleFields load_ensemble(const EnsembleManifest& manifest) {
  EnsembleFields out;
  out.parameter_names = manifest.parameter_names;
  out.thetas = manifest.thetas;
  out.runs.reserve(manifest.field_paths.size());
  for (const auto& p : manifest.field_paths) out.runs.push_back(read_field_csv(p));
  if (out.runs.size() < 2) throw ValidationError("an ensemble needs at least two runs");
  check_colocated(out.runs);
  return out;
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  if (!header.empty()) {
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) out << (k ? "," : "") << format_double(m(i, k));
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (has_header) std::getline(in, line);
  std::vector<std::vector<double>> rows;
  std::size_t line_no = has_header ? 1 : 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, fmt::format("{}:{}", path.string(), line_no)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError(fmt::format("{}:{}: ragged row", path.string(), line_no));
    rows.push_back(std::move(row));
  }
  const auto cols = rows.empty() ? 0 : rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return m;
}

}  // namespace pccal
