#include "pccal/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "pccal/errors.hpp"

namespace pccal {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<double> axis_knots(double lo, double hi, double step) {
  const double extent = hi - lo;
  if (extent <= step * (1.0 + 1e-12)) return {lo};
  const auto count = static_cast<int>(std::ceil(extent / step - 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(lo + i * step);
  return out;
}

std::vector<double> periodic_knots(double lo, double step) {
  const auto count = std::max(1, static_cast<int>(std::ceil(360.0 / step - 1e-9)));
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(lo + i * step);
  return out;
}

bool spans_globe(const std::vector<double>& lons) {
  if (lons.size() < 2) return false;
  const double extent = lons.back() - lons.front();
  const double spacing = extent / static_cast<double>(lons.size() - 1);
  return extent + spacing >= 360.0 - 1e-6;
}

}  // namespace

double geodesic_km(double lon1, double lat1, double lon2, double lat2) {
  if (std::abs(lat1) > 90.0 || std::abs(lat2) > 90.0)
    throw ValidationError(fmt::format("latitude outside [-90, 90]: {}, {}", lat1, lat2));
  const double c = std::sin(lat1 * kDeg) * std::sin(lat2 * kDeg) +
                   std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) * std::cos(std::abs(lon1 - lon2) * kDeg);
  return kEarthRadiusKm * std::acos(std::clamp(c, -1.0, 1.0));
}

KnotSet make_knot_grid(const GridSpec& spec, double lat_step, double lon_step, double depth_step) {
  if (!(lat_step > 0.0) || !(lon_step > 0.0) || !(depth_step > 0.0))
    throw ValidationError("knot spacings must be positive");
  const auto& lons = spec.lons();
  const auto& lats = spec.lats();
  const auto& depths = spec.depths();
  const auto klon = spans_globe(lons) ? periodic_knots(lons.front(), lon_step)
                                      : axis_knots(lons.front(), lons.back(), lon_step);
  const auto klat = axis_knots(lats.front(), lats.back(), lat_step);
  const auto kdepth = axis_knots(depths.front(), depths.back(), depth_step);

  KnotSet set;
  set.lon_step = lon_step;
  set.lat_step = lat_step;
  set.depth_step = depth_step;
  set.nlon = static_cast<int>(klon.size());
  set.nlat = static_cast<int>(klat.size());
  set.ndepth = static_cast<int>(kdepth.size());
  set.knots.reserve(klon.size() * klat.size() * kdepth.size());
  for (double d : kdepth)
    for (double la : klat)
      for (double lo : klon) set.knots.push_back({lo, std::min(la, 90.0), d});
  return set;
}

Eigen::MatrixXd build_kernel(std::span<const Coord> locations, std::span<const Coord> knots, double phi_surface_km,
                             double phi_depth_m) {
  if (!(phi_surface_km > 0.0) || !(phi_depth_m > 0.0))
    throw ValidationError("discrepancy kernel ranges must be positive");
  const auto n = static_cast<Eigen::Index>(locations.size());
  const auto J = static_cast<Eigen::Index>(knots.size());
  Eigen::MatrixXd K(n, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const Coord& a = knots[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const Coord& s = locations[static_cast<std::size_t>(i)];
      const double g = geodesic_km(s.lon, s.lat, a.lon, a.lat);
      K(i, j) = std::exp(-g / phi_surface_km - std::abs(s.depth - a.depth) / phi_depth_m);
    }
  }
  return K;
}

Eigen::Index components_for_energy(const Eigen::VectorXd& singular_values, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ValidationError(fmt::format("variance fraction {} is outside (0, 1]", fraction));
  const Eigen::VectorXd energy = singular_values.array().square();
  const double total = energy.sum();
  if (!(total > 0.0)) throw ValidationError("kernel matrix is zero");
  double running = 0.0;
  for (Eigen::Index j = 0; j < energy.size(); ++j) {
    running += energy(j);
    if (running >= fraction * total * (1.0 - 1e-12)) return j + 1;
  }
  return energy.size();
}

TruncatedKernel truncate_basis(const Eigen::MatrixXd& kernel, const TruncationSelection& selection) {
  if (selection.fraction.has_value() == selection.count.has_value())
    throw ValidationError("truncation needs exactly one of a fraction or a component count");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(kernel, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = s.size() > 0 ? s(0) * static_cast<double>(std::max(kernel.rows(), kernel.cols())) *
                                        std::numeric_limits<double>::epsilon()
                                  : 0.0;
  TruncatedKernel out;
  while (out.rank < s.size() && s(out.rank) > tol) ++out.rank;
  out.singular_values = s.head(out.rank);
  Eigen::Index J = 0;
  if (selection.count) {
    J = *selection.count;
    if (J < 1 || J > std::min(kernel.rows(), kernel.cols()))
      throw ValidationError(fmt::format("discrepancy component count {} outside [1, {}]", J,
                                        std::min(kernel.rows(), kernel.cols())));
    if (J > out.rank)
      throw ValidationError(fmt::format("discrepancy kernel has rank {} < requested {} components", out.rank, J));
  } else {
    if (out.rank == 0) throw ValidationError("kernel matrix is zero");
    J = components_for_energy(out.singular_values, *selection.fraction);
  }
  out.basis.resize(kernel.rows(), J);
  for (Eigen::Index j = 0; j < J; ++j) {
    Eigen::VectorXd u = svd.matrixU().col(j);
    Eigen::Index arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0) u = -u;
    out.basis.col(j) = selection.scaled ? (s(j) * u).eval() : u;
  }
  return out;
}

DiscrepancyBasis build_discrepancy(const GridSpec& spec, std::span<const GridIndex> support,
                                   const DiscrepancySettings& settings) {
  DiscrepancyBasis d;
  d.knots = make_knot_grid(spec, settings.lat_step, settings.lon_step, settings.depth_step);
  d.phi_surface_km = settings.phi_surface_km;
  d.phi_depth_m = settings.phi_depth_m;
  const auto coords = coordinates(spec, support);
  d.kernel = build_kernel(coords, d.knots.knots, settings.phi_surface_km, settings.phi_depth_m);
  d.truncated = truncate_basis(d.kernel, settings.selection);
  return d;
}

}  // namespace pccal
