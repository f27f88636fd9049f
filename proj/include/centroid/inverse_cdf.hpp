#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace centroid {

/// Tabulated cumulative distribution of a one-dimensional density on [-L, L].
/// Forward evaluation interpolates linearly; inversion uses a monotone cubic
/// (Fritsch-Carlson) through the nodes (F_k, x_k), so quantile(cdf(x_k)) == x_k.
class TabulatedInverseCdf {
 public:
  static constexpr std::size_t kDefaultGridPoints = std::size_t{1} << 16;
  /// Largest allowed density at either endpoint relative to the peak.
  static constexpr double kEndpointTolerance = 1e-9;

  /// Integrates density on each grid cell with two-point Gauss-Legendre and
  /// normalizes the running sum to 1. Throws NumericalError for non-finite or
  /// vanishing densities and when the endpoints are not in the tails.
  TabulatedInverseCdf(const std::function<double(double)>& density, double half_width,
                      std::size_t grid_points = kDefaultGridPoints);

  double cdf(double x) const noexcept;
  /// u in [0, 1]; values outside are clamped.
  double quantile(double u) const noexcept;

  double half_width() const noexcept { return half_width_; }
  std::span<const double> grid() const noexcept { return grid_; }
  std::span<const double> cdf_values() const noexcept { return cdf_; }

 private:
  double half_width_;
  std::vector<double> grid_;
  std::vector<double> cdf_;
  // Inversion nodes: strictly increasing F with matching x and PCHIP slopes dx/dF.
  std::vector<double> node_f_;
  std::vector<double> node_x_;
  std::vector<double> node_slope_;
};

}  // namespace centroid
