#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pccal {

/// Position of a cell in a lon x lat x depth grid.
struct GridIndex {
  int lon = 0;
  int lat = 0;
  int depth = 0;
  auto operator<=>(const GridIndex&) const = default;
};

/// Physical location: degrees east, degrees north, meters below surface.
struct Coord {
  double lon = 0.0;
  double lat = 0.0;
  double depth = 0.0;
};

/// Rectilinear lon/lat/depth grid with per-cell volume weights.
///
/// Cells are addressed depth-major, then latitude, then longitude; the same
/// ordering defines the canonical layout of every vectorized field.
class GridSpec {
 public:
  GridSpec() = default;
  /// Uniform unit volumes.
  GridSpec(std::vector<double> lons, std::vector<double> lats, std::vector<double> depths);
  GridSpec(std::vector<double> lons, std::vector<double> lats, std::vector<double> depths,
           std::vector<double> cell_volumes);

  const std::vector<double>& lons() const { return lons_; }
  const std::vector<double>& lats() const { return lats_; }
  const std::vector<double>& depths() const { return depths_; }
  const std::vector<double>& cell_volumes() const { return volumes_; }

  int nlon() const { return static_cast<int>(lons_.size()); }
  int nlat() const { return static_cast<int>(lats_.size()); }
  int ndepth() const { return static_cast<int>(depths_.size()); }
  std::size_t cell_count() const { return lons_.size() * lats_.size() * depths_.size(); }

  std::size_t flat_index(const GridIndex& idx) const {
    return (static_cast<std::size_t>(idx.depth) * lats_.size() + static_cast<std::size_t>(idx.lat)) *
               lons_.size() +
           static_cast<std::size_t>(idx.lon);
  }
  GridIndex grid_index(std::size_t flat) const;
  Coord coord(const GridIndex& idx) const {
    return {lons_[idx.lon], lats_[idx.lat], depths_[idx.depth]};
  }
  double volume(const GridIndex& idx) const { return volumes_[flat_index(idx)]; }

  /// Same coordinates (volumes not compared).
  bool same_coordinates(const GridSpec& other) const;

 private:
  std::vector<double> lons_;
  std::vector<double> lats_;
  std::vector<double> depths_;
  std::vector<double> volumes_;
};

/// Masked scalar field on a GridSpec. Masked cells hold NaN.
class GridField {
 public:
  GridField() = default;
  /// `mask[i] != 0` marks a valid (ocean) cell. Throws ValidationError on
  /// shape mismatch, non-finite valid values or non-positive valid volumes.
  GridField(GridSpec spec, std::vector<double> values, std::vector<std::uint8_t> mask);

  const GridSpec& spec() const { return spec_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  bool valid(std::size_t flat) const { return mask_[flat] != 0; }
  double value(const GridIndex& idx) const { return values_[spec_.flat_index(idx)]; }
  std::size_t valid_count() const;

 private:
  GridSpec spec_;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// Unmasked values of a field in canonical order together with their cells.
struct FieldVector {
  Eigen::VectorXd values;
  std::vector<GridIndex> locations;

  Eigen::Index size() const { return values.size(); }
};

/// Valid cells of a field in canonical order.
std::vector<GridIndex> support(const GridField& field);

/// Throws ValidationError when the field has no valid cell.
FieldVector vectorize(const GridField& field);

/// Inverse of vectorize: cells not listed in `vec.locations` are masked.
GridField devectorize(const FieldVector& vec, const GridSpec& spec);

/// Collapses longitude: volume-weighted mean over valid lon cells for each
/// (lat, depth). The output grid has a single longitude at the midpoint of the
/// input range and carries the summed volumes of the contributing cells.
GridField zonal_mean(const GridField& field);

/// Collapses longitude and latitude per depth level (volume-weighted).
GridField vertical_mean(const GridField& field);

/// Volume-weighted mean over all valid cells.
double weighted_mean(const GridField& field);

/// Sorted positions of a simple random sample of k out of n, reproducible per seed.
std::vector<std::size_t> subsample_positions(std::size_t n, std::size_t k, std::uint64_t seed);

/// Simple random sample without replacement of k valid cells, returned in
/// canonical order. Throws ValidationError when k exceeds the valid count.
FieldVector random_subsample(const GridField& field, std::size_t k, std::uint64_t seed);

std::vector<Coord> coordinates(const GridSpec& spec, std::span<const GridIndex> cells);

}  // namespace pccal
