#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pccal/field_grid.hpp"

namespace pccal {

/// Reads a field file: CSV with header `lon,lat,depth,volume,value` (the
/// volume column may be omitted, giving unit weights), one row per valid cell.
/// Axes are the sorted unique coordinates; absent combinations are masked.
GridField read_field_csv(const std::filesystem::path& path);
void write_field_csv(const std::filesystem::path& path, const GridField& field);

/// JSON manifest: {"parameters": [names], "runs": [{"theta": [...], "field": "path"}]}.
/// Relative field paths resolve against the manifest's directory.
struct EnsembleManifest {
  std::vector<std::string> parameter_names;
  Eigen::MatrixXd thetas;  // p x q
  std::vector<std::filesystem::path> field_paths;
};

EnsembleManifest read_ensemble_manifest(const std::filesystem::path& path);
void write_ensemble_manifest(const std::filesystem::path& path, const EnsembleManifest& manifest);

/// Simulator runs on a shared grid and mask.
struct EnsembleFields {
  std::vector<std::string> parameter_names;
  Eigen::MatrixXd thetas;  // p x q
  std::vector<GridField> runs;
};

/// Throws ValidationError when runs disagree in grid or mask.
void check_colocated(const std::vector<GridField>& fields);
EnsembleFields load_ensemble(const EnsembleManifest& manifest);

/// Plain numeric CSV; an optional header row of column names.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {});
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, bool has_header);

/// Round-trip formatting for doubles written to text outputs.
std::string format_double(double v);

/// Splits one CSV line on commas (no quoting).
std::vector<std::string> split_csv_line(const std::string& line);
double parse_double(const std::string& text, const std::string& context);

}  // namespace pccal
