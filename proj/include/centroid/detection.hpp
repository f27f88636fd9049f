#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "centroid/sampler.hpp"

namespace centroid {

/// Method I reuses every event at every shift; method II gives each shift its own chunk.
enum class Method { I, II };

std::string to_string(Method method);
/// Accepts "I" or "II"; throws ConfigError otherwise.
Method parse_method(std::string_view text);

/// Detector i covers [shift + (i - 1/2) d0, shift + (i + 1/2) d0) and reports shift + i d0.
class DetectorArray {
 public:
  DetectorArray(double d0, double shift, double rho);

  double d0() const noexcept { return d0_; }
  double shift() const noexcept { return shift_; }
  double rho() const noexcept { return rho_; }
  /// Number of detection bins p = round(rho / d0), at least 1.
  std::int64_t bins() const noexcept;

  std::int64_t index_of(double x) const noexcept {
    return static_cast<std::int64_t>(std::floor((x - shift_) / d0_ + 0.5));
  }
  double outcome(std::int64_t i) const noexcept { return shift_ + static_cast<double>(i) * d0_; }

 private:
  double d0_;
  double shift_;
  double rho_;
};

/// Detector size multiplier * base_size probed at shifts offset + j * base_size,
/// j = 0 .. multiplier - 1. Centroids are collected on the grid
/// offset + k * base_size / N restricted to [-rho/2, rho/2].
struct ShiftPlan {
  double base_size = 0.0;
  int multiplier = 1;
  Method method = Method::I;
  double rho = 7.0;
  double offset = 0.0;

  /// Throws ConfigError for non-positive sizes or multipliers.
  void validate() const;
  double detector_size() const noexcept { return multiplier * base_size; }
  double shift(int j) const noexcept { return offset + static_cast<double>(j) * base_size; }
  DetectorArray array(int j) const { return DetectorArray(detector_size(), shift(j), rho); }
};

/// Counts on the grid offset + k * spacing for k_min <= k <= k_max, where the
/// centres fill [-half_range, half_range]. Only every stride-th index (k % stride
/// == 0) can receive counts from a pooled shift plan; the others are unreachable.
class CentroidHistogram {
 public:
  CentroidHistogram(double spacing, double offset, double half_range, int stride = 1);

  double spacing() const noexcept { return spacing_; }
  double offset() const noexcept { return offset_; }
  double half_range() const noexcept { return half_range_; }
  int stride() const noexcept { return stride_; }
  std::int64_t min_index() const noexcept { return k_min_; }
  std::int64_t max_index() const noexcept { return k_min_ + static_cast<std::int64_t>(counts_.size()) - 1; }
  std::size_t size() const noexcept { return counts_.size(); }

  /// Centre of storage slot i (grid index k_min + i).
  double center(std::size_t i) const noexcept;
  bool reachable(std::size_t i) const noexcept;
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::span<std::uint64_t> mutable_counts() noexcept { return counts_; }
  std::uint64_t total() const noexcept;

  /// Adds a value at its nearest centre; returns false (and counts it as
  /// excluded) if that centre lies outside the range.
  bool add(double value);

  // Provenance recorded in the CSV header.
  double detector_size = 0.0;
  std::string method;
  int n_shifts = 0;
  double rho = 0.0;
  std::uint64_t excluded = 0;

 private:
  double spacing_;
  double offset_;
  double half_range_;
  int stride_;
  std::int64_t k_min_;
  std::vector<std::uint64_t> counts_;
};

/// Every position replaced by the outcome of the detector that registers it.
EventBatch discretize(const EventBatch& batch, const DetectorArray& array);

/// shift + (d0 / N) sum_n i_n for positions already on the outcome lattice.
/// Throws ConfigError for off-lattice input.
double discrete_centroid(std::span<const double> row, const DetectorArray& array);

/// Pools the centroid outcomes of all shifts of the plan on the common grid.
/// An (event, shift) outcome whose centroid falls outside [-rho/2, rho/2] is
/// dropped and counted in CentroidHistogram::excluded.
CentroidHistogram run_plan(const EventBatch& batch, const ShiftPlan& plan, int threads = 1);

/// Histogram of the undiscretized centroids on the grid k * spacing.
CentroidHistogram continuous_histogram(const EventBatch& batch, double spacing, double rho);

/// Fraction of events whose N photons land in the same detector.
double multiphoton_fraction(const EventBatch& batch, const DetectorArray& array, int threads = 1);

void write_histogram_csv(const std::filesystem::path& path, const CentroidHistogram& histogram,
                         std::span<const std::string> extra_header = {});

}  // namespace centroid
