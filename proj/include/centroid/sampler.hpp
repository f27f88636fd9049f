#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "centroid/inverse_cdf.hpp"
#include "centroid/states.hpp"

namespace centroid {

/// Orthogonal change of variables y = M x. Row 0 is (1,...,1)/sqrt(n), so y_0 = sqrt(n) X.
struct TransformMatrix {
  int n = 0;
  std::vector<double> entries;  ///< row-major n x n
  int centroid_row_index = 0;

  double at(int row, int col) const { return entries[static_cast<std::size_t>(row * n + col)]; }
  /// y = M x
  void apply(std::span<const double> x, std::span<double> y) const;
  /// x = M^T y
  void apply_transpose(std::span<const double> y, std::span<double> x) const;
};

/// n in {2, 3, 4}; throws ConfigError otherwise.
TransformMatrix transform_matrix(int n);

/// N0 x N photon positions in units of lambda, row-major, with provenance.
class EventBatch {
 public:
  EventBatch(int n_photons, std::vector<double> positions, std::uint64_t seed,
             nlohmann::json state_descriptor, std::uint64_t first_event = 0);

  int n_photons() const noexcept { return n_photons_; }
  std::size_t n_events() const noexcept { return positions_.size() / n_photons_; }
  std::uint64_t seed() const noexcept { return seed_; }
  /// Global index of row 0 within the sampled run (non-zero for split parts).
  std::uint64_t first_event() const noexcept { return first_event_; }
  const nlohmann::json& state_descriptor() const noexcept { return state_; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {positions_.data() + i * n_photons_, static_cast<std::size_t>(n_photons_)};
  }
  std::span<const double> positions() const noexcept { return positions_; }
  std::span<double> mutable_positions() noexcept { return positions_; }

  /// Contiguous rows [begin, begin + count) as a new batch.
  EventBatch slice(std::size_t begin, std::size_t count) const;

 private:
  int n_photons_;
  std::vector<double> positions_;
  std::uint64_t seed_;
  nlohmann::json state_;
  std::uint64_t first_event_;
};

/// Draws events for one state. NOON and cat states draw the centroid-direction
/// coordinate from a tabulated inverse CDF; every other transformed coordinate
/// is Gaussian. Event i uses EventStream(seed, i): one uniform first (if the
/// state needs it), then the normals in row order.
class Sampler {
 public:
  explicit Sampler(StateModel state,
                   std::size_t grid_points = TabulatedInverseCdf::kDefaultGridPoints);

  const StateModel& state() const noexcept { return state_; }
  const TransformMatrix& transform() const noexcept { return transform_; }
  /// Null for jointly Gaussian states.
  const TabulatedInverseCdf* centroid_cdf() const noexcept { return cdf_.get(); }

  /// Unnormalized density of y_0 = sqrt(N) X with all other coordinates at zero.
  double centroid_direction_density(double y) const;
  /// Standard deviation of each Gaussian coordinate y_1..y_{N-1}.
  double relative_sd() const noexcept { return relative_sd_; }

  void sample_event(std::uint64_t seed, std::uint64_t event_index, std::span<double> out) const;
  /// Events first_event .. first_event + n_events - 1 of the run with this seed.
  EventBatch sample(std::size_t n_events, std::uint64_t seed, int threads = 1,
                    std::uint64_t first_event = 0) const;

 private:
  StateModel state_;
  TransformMatrix transform_;
  std::shared_ptr<const TabulatedInverseCdf> cdf_;
  double centroid_sd_ = 0.0;  // jointly Gaussian only
  double relative_sd_ = 0.0;
};

EventBatch sample_events(const StateModel& state, std::size_t n_events, std::uint64_t seed,
                         int threads = 1);

struct SplitResult {
  std::vector<EventBatch> parts;
  std::size_t dropped = 0;
};

/// m contiguous parts of floor(N0 / m) rows each; the remainder is dropped.
SplitResult split_batch(const EventBatch& batch, std::size_t parts);

/// CSV with "# state=", "# seed=", "# n_photons=", "# first_event=" headers and
/// 17 significant digits. extra_header lines are written as "# <line>".
void write_event_csv(const std::filesystem::path& path, const EventBatch& batch,
                     std::span<const std::string> extra_header = {});
/// With verify set, the events are regenerated from the header and compared bit for bit.
EventBatch read_event_csv(const std::filesystem::path& path, bool verify = false, int threads = 1);

}  // namespace centroid
