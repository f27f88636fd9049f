#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "centroid/analysis.hpp"
#include "centroid/detection.hpp"
#include "centroid/sampler.hpp"
#include "centroid/states.hpp"

namespace centroid {

/// 7 lambda for N = 2, 7 lambda * 2 / N otherwise.
double default_rho(int n_photons);
/// [-rho/2, rho/2] with the default rho; [-3.5, 3.5] for cat states.
Window default_window(const StateModel& state);
/// Multiples of d0_min = lambda/1000 from lambda/1000 to 1.2 lambda, geometric
/// below lambda/5 and in steps of lambda/20 above; contains 250, 500 and 1000.
std::vector<int> default_size_multipliers();

struct DetectorConfig {
  double d0_min = 1e-3;
  std::vector<int> size_multipliers = default_size_multipliers();
  std::optional<double> rho;  ///< default_rho(N) when unset
};

/// Everything a command needs. Fields that a command does not use are ignored.
struct ExperimentConfig {
  nlohmann::json state = {{"type", "noon"}, {"n", 2}};
  std::size_t n_events = 1'000'000;
  std::uint64_t seed = 1;
  DetectorConfig detector;
  Method method = Method::I;
  std::optional<Window> window;  ///< default_window(state) when unset
  std::string output_dir = "out";

  // sweep-shift
  std::vector<double> shift_sizes = {0.25, 0.3, 0.5, 0.7, 1.0};
  int shifts_per_size = 20;
  // subsets
  std::vector<std::size_t> subset_counts = {1, 2, 5, 10};
  // mpa
  double k_variance = 1.0;
  std::vector<double> b_grid;  ///< empty: r = 1 .. 0.98 sqrt(N) in 15 steps
  double d_mp = kDefaultCloseDistance;
  CoincidenceRule coincidence_rule = CoincidenceRule::squared_separation;
  // fixed-feature
  std::vector<int> photon_numbers = {2, 3, 4};
  // cat
  std::vector<double> alpha_grid = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25,
                                    2.5,  2.75, 3.0, 3.25, 3.5, 3.75, 4.0, 4.5, 5.0};
  std::vector<double> phi_grid = {0.0, 0.39269908169872414, 0.78539816339744828,
                                  1.1780972450961724, 1.5707963267948966};
  double cat_alpha_for_phi = 1.0;
  double cat_detector_size = 0.01;

  StateModel state_model() const { return StateModel::from_json(state); }
  double rho() const;
  Window comparison_window() const;
  /// Throws ConfigError on any invalid field.
  void validate() const;

  nlohmann::json to_json() const;
  /// Strict: unknown keys are rejected; missing keys take the defaults above.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// 64-bit FNV-1a of to_json().dump(), as 16 hex digits.
  std::string hash() const;
};

// ---------------------------------------------------------------------------
// Building blocks

struct SizeSweepRow {
  double detector_size;
  int multiplier;
  double rms;
  double scale;
  std::size_t b;
  std::uint64_t excluded;
};

/// For each multiplier m: pool the m shifts of size m * d0_min (method I or II) and recover.
std::vector<SizeSweepRow> sweep_size(const EventBatch& batch, const StateModel& state,
                                     double d0_min, const std::vector<int>& multipliers,
                                     Method method, double rho, Window window, int threads = 1);

struct ShiftSweepRow {
  double detector_size;
  double shift;
  double rms;
};

/// Single arrays of each size at shifts size * j / shifts_per_size, each fitted on its own.
std::vector<ShiftSweepRow> sweep_shift(const EventBatch& batch, const StateModel& state,
                                       const std::vector<double>& sizes, int shifts_per_size,
                                       double rho, Window window, int threads = 1);

struct SubsetRow {
  std::size_t parts;
  double detector_size;
  double mean_rms;
  double min_rms;
  double max_rms;
};

/// Splits the batch into k disjoint parts, sweeps each and averages pointwise.
std::vector<SubsetRow> sweep_subsets(const EventBatch& batch, const StateModel& state,
                                     const std::vector<std::size_t>& subset_counts, double d0_min,
                                     const std::vector<int>& multipliers, Method method,
                                     double rho, Window window, int threads = 1);

struct MpaRow {
  double b;
  double beta;
  double r;
  std::uint64_t n_close;
  std::uint64_t n_total;
  double r_tot;
  double r_peak;
  double width_w;
  double width_rms;
  double r_tot_theory;
  double r_peak_theory;
  double w_classical;
  double w_min;
};

/// B values spanning r = 1 .. 0.98 sqrt(N) for the given <k_n^2>.
std::vector<double> default_b_grid(int n_photons, double k_variance, int points = 15);

/// Close-event analysis of a fresh continuous batch per B. Rates are normalized
/// by a batch at r = 1 (B = sqrt(<k_n^2> / N)) drawn with the same N0 and seed.
std::vector<MpaRow> mpa_sweep(int n_photons, double k_variance, const std::vector<double>& b_grid,
                              std::size_t n_events, std::uint64_t seed, double d_mp,
                              CoincidenceRule rule, int threads = 1);

/// B = 2 / N and beta = 1 (N = 2, 3) or 4/5 (N = 4): envelope exp(-8 X^2) for every N.
JointGaussianState fixed_feature_state(int n_photons);

struct CatRow {
  double alpha_mag;
  double alpha_phase;
  double rms;
};

/// rms at a single array of the given size (shift 0) for each (|alpha|, phi).
std::vector<CatRow> cat_sweep(const std::vector<double>& alpha_mags,
                              const std::vector<double>& phases, double detector_size,
                              std::size_t n_events, std::uint64_t seed, double rho, Window window,
                              int threads = 1);

// ---------------------------------------------------------------------------
// Commands: each writes its CSV files under config.output_dir and returns the
// paths written. CSV headers carry the config hash and the config itself.

struct CommandOutput {
  std::vector<std::filesystem::path> files;
  std::string summary;
};

CommandOutput cmd_sample(const ExperimentConfig& config, int threads);
CommandOutput cmd_sweep_size(const ExperimentConfig& config, int threads);
CommandOutput cmd_sweep_shift(const ExperimentConfig& config, int threads);
CommandOutput cmd_subsets(const ExperimentConfig& config, int threads);
CommandOutput cmd_mpa(const ExperimentConfig& config, int threads);
CommandOutput cmd_fixed_feature(const ExperimentConfig& config, int threads);
CommandOutput cmd_cat(const ExperimentConfig& config, int threads);

}  // namespace centroid
