#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "centroid/detection.hpp"
#include "centroid/sampler.hpp"
#include "centroid/states.hpp"

namespace centroid {

/// Least-squares amplitude c minimizing sum (ref_i - c z_i)^2.
double fit_scale(std::span<const double> reference, std::span<const double> estimate);

/// (1 / sqrt(b)) sqrt(sum (ref_i - z_i)^2).
double rms_deviation(std::span<const double> reference, std::span<const double> scaled_estimate);

struct Window {
  double lo = 0.0;
  double hi = 0.0;
};

struct RecoveryPoint {
  double x;
  double reference;
  double raw_estimate;
  double scaled_estimate;
};

struct RecoveryReport {
  double scale = 0.0;
  double rms = 0.0;
  std::size_t b = 0;
  Window window;
  std::vector<RecoveryPoint> points;
  nlohmann::json metadata;

  nlohmann::json to_json() const;
};

/// Compares the reachable histogram bins whose centres lie in the window with
/// the diagonal reference profile of the state. Throws NumericalError if the
/// window holds no reachable bin or the histogram is empty there.
RecoveryReport recover(const CentroidHistogram& histogram, const StateModel& state, Window window);

void write_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                  const RecoveryReport& report, std::span<const std::string> extra_header = {});

/// Ordinary least-squares slope of rms against size over sizes in [lo, hi].
/// Throws NumericalError with fewer than 3 points in range.
double slope_estimate(std::span<const double> sizes, std::span<const double> rms_values,
                      double lo, double hi);

/// separation: max_n x_n - min_n x_n <= d_mp.
/// squared_separation: (max_n x_n - min_n x_n)^2 <= d_mp, the reading of the
/// threshold under which the quoted close-event counts are reproduced.
enum class CoincidenceRule { separation, squared_separation };

std::string to_string(CoincidenceRule rule);
CoincidenceRule parse_coincidence_rule(const std::string& text);

inline constexpr double kDefaultCloseDistance = 1.0 / 400.0;

struct GaussianFit {
  double c = 0.0;
  double d = 0.0;
  /// 2 / sqrt(2 d), the width formula quoted with the fit model.
  double width_w() const;
  /// 1 / sqrt(2 d), the rms width of c exp(-d x^2).
  double width_rms() const;
};

/// Weighted least squares of log counts against x^2 (weights = counts) over
/// the bins with positive counts. Throws NumericalError with fewer than 10
/// such bins or a non-positive curvature.
GaussianFit gaussian_fit(const CentroidHistogram& histogram);

struct CloseEventReport {
  double d_mp = kDefaultCloseDistance;
  CoincidenceRule rule = CoincidenceRule::squared_separation;
  std::uint64_t n_close = 0;
  std::uint64_t n_total = 0;
  double raw_rate = 0.0;  ///< n_close / n_total
  double r_value = 0.0;   ///< spot-size reduction factor, NaN if the state is not jointly Gaussian
  double r_tot = 0.0;     ///< raw_rate normalized by the rate at r = 1 (NaN until normalized)
  double r_peak = 0.0;    ///< r * r_tot
  double width_w = 0.0;
  double width_rms = 0.0;
  bool fit_ok = false;

  /// Sets r_tot and r_peak from the close-event rate measured at r = 1.
  void normalize(double rate_at_r1);
};

/// Close events of an undiscretized batch and a Gaussian fit to their centroids.
/// A failed fit leaves fit_ok false and the widths at zero.
CloseEventReport close_event_analysis(const EventBatch& batch, double d_mp = kDefaultCloseDistance,
                                      CoincidenceRule rule = CoincidenceRule::squared_separation);

struct TheoreticalRates {
  double r_tot;
  double r_peak;
};

/// R_tot = ((N - r^2) / (N - 1))^((N - 1) / 2), R_peak = r R_tot for 1 <= r <= sqrt(N).
TheoreticalRates theoretical_rates(int n, double r);

}  // namespace centroid
