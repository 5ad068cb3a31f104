#include "pccal/field_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <fmt/format.h>

#include "pccal/errors.hpp"

namespace pccal {

namespace {

void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.empty()) throw ValidationError(fmt::format("grid axis '{}' is empty", name));
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i]))
      throw ValidationError(fmt::format("grid axis '{}' has a non-finite coordinate", name));
    if (i > 0 && !(axis[i] > axis[i - 1]))
      throw ValidationError(fmt::format("grid axis '{}' is not strictly increasing", name));
  }
}

double midpoint(const std::vector<double>& axis) { return 0.5 * (axis.front() + axis.back()); }

}  // namespace

GridSpec::GridSpec(std::vector<double> lons, std::vector<double> lats, std::vector<double> depths)
    : GridSpec(lons, lats, depths, std::vector<double>(lons.size() * lats.size() * depths.size(), 1.0)) {}

GridSpec::GridSpec(std::vector<double> lons, std::vector<double> lats, std::vector<double> depths,
                   std::vector<double> cell_volumes)
    : lons_(std::move(lons)),
      lats_(std::move(lats)),
      depths_(std::move(depths)),
      volumes_(std::move(cell_volumes)) {
  check_axis(lons_, "lon");
  check_axis(lats_, "lat");
  check_axis(depths_, "depth");
  if (volumes_.size() != cell_count())
    throw ValidationError(fmt::format("cell volume count {} does not match grid size {}",
                                      volumes_.size(), cell_count()));
}

GridIndex GridSpec::grid_index(std::size_t flat) const {
  GridIndex idx;
  idx.lon = static_cast<int>(flat % lons_.size());
  flat /= lons_.size();
  idx.lat = static_cast<int>(flat % lats_.size());
  idx.depth = static_cast<int>(flat / lats_.size());
  return idx;
}

bool GridSpec::same_coordinates(const GridSpec& other) const {
  return lons_ == other.lons_ && lats_ == other.lats_ && depths_ == other.depths_;
}

GridField::GridField(GridSpec spec, std::vector<double> values, std::vector<std::uint8_t> mask)
    : spec_(std::move(spec)), values_(std::move(values)), mask_(std::move(mask)) {
  const std::size_t n = spec_.cell_count();
  if (values_.size() != n || mask_.size() != n)
    throw ValidationError(fmt::format("field has {} values and {} mask entries for a grid of {} cells",
                                      values_.size(), mask_.size(), n));
  for (std::size_t i = 0; i < n; ++i) {
    if (mask_[i] == 0) {
      values_[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    if (!std::isfinite(values_[i]))
      throw ValidationError(fmt::format("non-finite value at valid cell {}", i));
    if (!(spec_.cell_volumes()[i] > 0.0))
      throw ValidationError(fmt::format("non-positive volume at valid cell {}", i));
  }
}

std::size_t GridField::valid_count() const {
  return static_cast<std::size_t>(std::count_if(mask_.begin(), mask_.end(), [](auto m) { return m != 0; }));
}

std::vector<GridIndex> support(const GridField& field) {
  std::vector<GridIndex> cells;
  cells.reserve(field.valid_count());
  for (std::size_t i = 0; i < field.spec().cell_count(); ++i)
    if (field.valid(i)) cells.push_back(field.spec().grid_index(i));
  return cells;
}

FieldVector vectorize(const GridField& field) {
  FieldVector out;
  out.locations = support(field);
  if (out.locations.empty()) throw ValidationError("field has no valid cells (empty domain)");
  out.values.resize(static_cast<Eigen::Index>(out.locations.size()));
  for (std::size_t i = 0; i < out.locations.size(); ++i)
    out.values(static_cast<Eigen::Index>(i)) = field.value(out.locations[i]);
  return out;
}

GridField devectorize(const FieldVector& vec, const GridSpec& spec) {
  if (static_cast<std::size_t>(vec.values.size()) != vec.locations.size())
    throw ValidationError("field vector values and locations differ in length");
  std::vector<double> values(spec.cell_count(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::uint8_t> mask(spec.cell_count(), 0);
  for (std::size_t i = 0; i < vec.locations.size(); ++i) {
    const auto& loc = vec.locations[i];
    if (loc.lon < 0 || loc.lon >= spec.nlon() || loc.lat < 0 || loc.lat >= spec.nlat() ||
        loc.depth < 0 || loc.depth >= spec.ndepth())
      throw ValidationError("field vector location outside the grid");
    const auto flat = spec.flat_index(loc);
    values[flat] = vec.values(static_cast<Eigen::Index>(i));
    mask[flat] = 1;
  }
  return GridField(spec, std::move(values), std::move(mask));
}

GridField zonal_mean(const GridField& field) {
  const GridSpec& in = field.spec();
  const std::size_t cells = static_cast<std::size_t>(in.nlat()) * in.ndepth();
  std::vector<double> sum(cells, 0.0), weight(cells, 0.0);
  for (int d = 0; d < in.ndepth(); ++d)
    for (int j = 0; j < in.nlat(); ++j)
      for (int i = 0; i < in.nlon(); ++i) {
        const GridIndex idx{i, j, d};
        const auto flat = in.flat_index(idx);
        if (!field.valid(flat)) continue;
        const double v = in.cell_volumes()[flat];
        const std::size_t out = static_cast<std::size_t>(d) * in.nlat() + j;
        sum[out] += v * field.values()[flat];
        weight[out] += v;
      }
  std::vector<double> values(cells), volumes(cells, 1.0);
  std::vector<std::uint8_t> mask(cells, 0);
  for (std::size_t c = 0; c < cells; ++c) {
    if (weight[c] > 0.0) {
      values[c] = sum[c] / weight[c];
      volumes[c] = weight[c];
      mask[c] = 1;
    }
  }
  GridSpec out({midpoint(in.lons())}, in.lats(), in.depths(), std::move(volumes));
  return GridField(std::move(out), std::move(values), std::move(mask));
}

GridField vertical_mean(const GridField& field) {
  const GridSpec& in = field.spec();
  const auto nd = static_cast<std::size_t>(in.ndepth());
  std::vector<double> sum(nd, 0.0), weight(nd, 0.0);
  for (std::size_t flat = 0; flat < in.cell_count(); ++flat) {
    if (!field.valid(flat)) continue;
    const auto d = static_cast<std::size_t>(in.grid_index(flat).depth);
    const double v = in.cell_volumes()[flat];
    sum[d] += v * field.values()[flat];
    weight[d] += v;
  }
  std::vector<double> values(nd), volumes(nd, 1.0);
  std::vector<std::uint8_t> mask(nd, 0);
  for (std::size_t d = 0; d < nd; ++d) {
    if (weight[d] > 0.0) {
      values[d] = sum[d] / weight[d];
      volumes[d] = weight[d];
      mask[d] = 1;
    }
  }
  GridSpec out({midpoint(in.lons())}, {midpoint(in.lats())}, in.depths(), std::move(volumes));
  return GridField(std::move(out), std::move(values), std::move(mask));
}

double weighted_mean(const GridField& field) {
  double sum = 0.0, weight = 0.0;
  for (std::size_t flat = 0; flat < field.spec().cell_count(); ++flat) {
    if (!field.valid(flat)) continue;
    const double v = field.spec().cell_volumes()[flat];
    sum += v * field.values()[flat];
    weight += v;
  }
  if (weight <= 0.0) throw ValidationError("field has no valid cells (empty domain)");
  return sum / weight;
}

std::vector<std::size_t> subsample_positions(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) throw ValidationError(fmt::format("cannot sample {} locations out of {}", k, n));
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

FieldVector random_subsample(const GridField& field, std::size_t k, std::uint64_t seed) {
  const FieldVector full = vectorize(field);
  const auto picks = subsample_positions(full.locations.size(), k, seed);
  FieldVector out;
  out.values.resize(static_cast<Eigen::Index>(k));
  out.locations.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.values(static_cast<Eigen::Index>(i)) = full.values(static_cast<Eigen::Index>(picks[i]));
    out.locations.push_back(full.locations[picks[i]]);
  }
  return out;
}

std::vector<Coord> coordinates(const GridSpec& spec, std::span<const GridIndex> cells) {
  std::vector<Coord> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(spec.coord(c));
  return out;
}

}  // namespace pccal
