#include "centroid/inverse_cdf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "centroid/error.hpp"

namespace centroid {

TabulatedInverseCdf::TabulatedInverseCdf(const std::function<double(double)>& density,
                                         double half_width, std::size_t grid_points)
    : half_width_(half_width) {
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    throw ConfigError("inverse CDF half-width must be positive");
  }
  if (grid_points < 3) throw ConfigError("inverse CDF needs at least 3 grid points");

  const double h = 2.0 * half_width / static_cast<double>(grid_points - 1);
  const double gauss_offset = h / (2.0 * std::sqrt(3.0));
  auto eval = [&](double x) {
    const double f = density(x);
    if (!std::isfinite(f) || f < 0.0) {
      std::ostringstream msg;
      msg << "density is " << f << " at x = " << x;
      throw NumericalError(msg.str());
    }
    return f;
  };

  grid_.resize(grid_points);
  cdf_.resize(grid_points);
  double peak = 0.0;
  double running = 0.0;
  for (std::size_t i = 0; i < grid_points; ++i) {
    grid_[i] = -half_width + static_cast<double>(i) * h;
    cdf_[i] = running;
    peak = std::max(peak, eval(grid_[i]));
    if (i + 1 < grid_points) {
      const double centre = grid_[i] + 0.5 * h;
      const double a = eval(centre - gauss_offset);
      const double b = eval(centre + gauss_offset);
      peak = std::max({peak, a, b});
      running += 0.5 * h * (a + b);
    }
  }
  grid_.back() = half_width;
  if (!(running > 0.0)) throw NumericalError("density is numerically zero on the whole grid");
  const double edge = std::max(eval(grid_.front()), eval(grid_.back()));
  if (edge > kEndpointTolerance * peak) {
    std::ostringstream msg;
    msg << "inverse CDF half-width " << half_width << " too small: endpoint density is "
        << edge / peak << " of the peak";
    throw NumericalError(msg.str());
  }
  for (double& c : cdf_) c /= running;
  cdf_.back() = 1.0;

  // Equal F values carry no information for inversion; keep the last x of each run.
  node_f_.reserve(grid_points);
  node_x_.reserve(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i) {
    if (!node_f_.empty() && cdf_[i] <= node_f_.back()) {
      node_x_.back() = grid_[i];
      continue;
    }
    node_f_.push_back(cdf_[i]);
    node_x_.push_back(grid_[i]);
  }
  const std::size_t n = node_f_.size();
  if (n < 2) throw NumericalError("inverse CDF has fewer than two distinct levels");

  std::vector<double> secant(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    secant[k] = (node_x_[k + 1] - node_x_[k]) / (node_f_[k + 1] - node_f_[k]);
  }
  node_slope_.resize(n);
  node_slope_.front() = secant.front();
  node_slope_.back() = secant.back();
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double h0 = node_f_[k] - node_f_[k - 1];
    const double h1 = node_f_[k + 1] - node_f_[k];
    const double w1 = 2.0 * h1 + h0;
    const double w2 = h1 + 2.0 * h0;
    node_slope_[k] = (w1 + w2) / (w1 / secant[k - 1] + w2 / secant[k]);
  }
}

double TabulatedInverseCdf::cdf(double x) const noexcept {
  if (x <= grid_.front()) return 0.0;
  if (x >= grid_.back()) return 1.0;
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
  const double t = (x - grid_[i]) / (grid_[i + 1] - grid_[i]);
  return cdf_[i] + t * (cdf_[i + 1] - cdf_[i]);
}

double TabulatedInverseCdf::quantile(double u) const noexcept {
  if (u <= node_f_.front()) return node_x_.front();
  if (u >= node_f_.back()) return node_x_.back();
  const auto it = std::upper_bound(node_f_.begin(), node_f_.end(), u);
  const std::size_t k = static_cast<std::size_t>(it - node_f_.begin()) - 1;
  const double h = node_f_[k + 1] - node_f_[k];
  const double t = (u - node_f_[k]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double x = (2.0 * t3 - 3.0 * t2 + 1.0) * node_x_[k] +
                   (t3 - 2.0 * t2 + t) * h * node_slope_[k] +
                   (-2.0 * t3 + 3.0 * t2) * node_x_[k + 1] + (t3 - t2) * h * node_slope_[k + 1];
  // Guard against round-off leaving the cell.
  return std::clamp(x, node_x_[k], node_x_[k + 1]);
}

}  // namespace centroid
