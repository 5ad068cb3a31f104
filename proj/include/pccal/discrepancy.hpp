#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pccal/field_grid.hpp"

namespace pccal {

inline constexpr double kEarthRadiusKm = 6378.0;

/// Great-circle distance in km between (lon, lat) points given in degrees.
/// The arccos argument is clamped to [-1, 1].
double geodesic_km(double lon1, double lat1, double lon2, double lat2);

/// Knot locations anchoring the discrepancy kernels.
struct KnotSet {
  std::vector<Coord> knots;
  double lon_step = 0.0;
  double lat_step = 0.0;
  double depth_step = 0.0;
  int nlon = 0;
  int nlat = 0;
  int ndepth = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(knots.size()); }
};

/// Regular knot grid anchored at the minimum corner of the grid's coordinate
/// box. Along each axis knots are placed every `step` until the axis is
/// covered (the last knot may sit up to one step past the far edge); an axis
/// whose extent does not exceed its step gets a single knot. A longitude
/// axis spanning the globe wraps, with ceil(360 / lon_step) knots.
/// Knots are ordered depth-major, then latitude, then longitude.
KnotSet make_knot_grid(const GridSpec& spec, double lat_step, double lon_step, double depth_step);

/// Kernel matrix (n x J_d): exp(-geodesic(s_i, a_j) / phi_surface_km - |depth_i - depth_j| / phi_depth_m).
Eigen::MatrixXd build_kernel(std::span<const Coord> locations, std::span<const Coord> knots, double phi_surface_km,
                             double phi_depth_m);

struct TruncationSelection {
  std::optional<double> fraction;  // of squared singular values
  std::optional<Eigen::Index> count;
  /// Columns scaled by singular values (U S) rather than orthonormal (U).
  bool scaled = true;

  static TruncationSelection by_fraction(double f, bool scaled = true) { return {f, std::nullopt, scaled}; }
  static TruncationSelection by_count(Eigen::Index j, bool scaled = true) { return {std::nullopt, j, scaled}; }
};

struct TruncatedKernel {
  Eigen::MatrixXd basis;            // n x J_d^PC, orthogonal columns
  Eigen::VectorXd singular_values;  // every nonzero singular value of K_d
  Eigen::Index rank = 0;

  Eigen::Index components() const { return basis.cols(); }
};

/// Smallest J with sum_{i<=J} s_i^2 / sum s_i^2 >= fraction.
Eigen::Index components_for_energy(const Eigen::VectorXd& singular_values, double fraction);

/// Leading left singular vectors of K_d. Throws ValidationError when the
/// requested count exceeds the numerical rank or min(n, J_d).
TruncatedKernel truncate_basis(const Eigen::MatrixXd& kernel, const TruncationSelection& selection);

/// Knots, fixed ranges, kernel and truncated basis for one set of locations.
struct DiscrepancyBasis {
  KnotSet knots;
  double phi_surface_km = 4800.0;
  double phi_depth_m = 3000.0;
  Eigen::MatrixXd kernel;     // K_d
  TruncatedKernel truncated;  // K_d^PC

  const Eigen::MatrixXd& basis() const { return truncated.basis; }
  Eigen::Index components() const { return truncated.components(); }
};

struct DiscrepancySettings {
  double lat_step = 15.6;
  double lon_step = 36.0;
  double depth_step = 429.0;
  double phi_surface_km = 4800.0;
  double phi_depth_m = 3000.0;
  TruncationSelection selection = TruncationSelection::by_fraction(0.95);
};

DiscrepancyBasis build_discrepancy(const GridSpec& spec, std::span<const GridIndex> support,
                                   const DiscrepancySettings& settings);

}  // namespace pccal
