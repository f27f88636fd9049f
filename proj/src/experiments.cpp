#include "centroid/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "centroid/error.hpp"

namespace centroid {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Row = std::vector<std::string>;

void write_table(const std::filesystem::path& path, const ExperimentConfig& config,
                 const std::string& command, const Row& columns, const std::vector<Row>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << "# command=" << command << '\n'
      << "# config_hash=" << config.hash() << '\n'
      << "# config=" << config.to_json().dump() << '\n';
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

std::filesystem::path prepare_output_dir(const ExperimentConfig& config) {
  const std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + dir.string() + "'");
  }
  return dir;
}

// Strict object access for the config parser.
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  const nlohmann::json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    if (const auto* v = get(key)) {
      try {
        target = v->get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(where_ + "." + key + " has the wrong type");
      }
    }
  }

  void reject_unknown() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) {
        throw ConfigError("unknown key '" + item.key() + "' in " + where_);
      }
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Defaults

double default_rho(int n_photons) { return n_photons <= 2 ? 7.0 : 7.0 * 2.0 / n_photons; }

Window default_window(const StateModel& state) {
  if (state.get_if<CatState>()) return {-3.5, 3.5};
  const double half = default_rho(state.n_photons()) / 2.0;
  return {-half, half};
}

std::vector<int> default_size_multipliers() {
  std::vector<int> m = {1, 2, 3, 5, 7, 10, 15, 20, 30, 50, 70, 100, 150, 200};
  for (int k = 250; k <= 1200; k += 50) m.push_back(k);
  return m;
}

// ---------------------------------------------------------------------------
// ExperimentConfig

double ExperimentConfig::rho() const {
  return detector.rho.value_or(default_rho(state_model().n_photons()));
}

Window ExperimentConfig::comparison_window() const {
  return window.value_or(default_window(state_model()));
}

void ExperimentConfig::validate() const {
  const StateModel model = state_model();
  if (n_events < 1) throw ConfigError("n_events must be at least 1");
  if (!(detector.d0_min > 0.0)) throw ConfigError("detector.d0_min must be positive");
  if (detector.size_multipliers.empty()) throw ConfigError("detector.size_multipliers is empty");
  for (int m : detector.size_multipliers) {
    if (m < 1) throw ConfigError("detector.size_multipliers must be positive");
  }
  if (detector.rho && !(*detector.rho > 0.0)) throw ConfigError("detector.rho must be positive");
  if (window && !(window->hi > window->lo)) throw ConfigError("window must satisfy lo < hi");
  for (double s : shift_sizes) {
    if (!(s > 0.0)) throw ConfigError("shift_sizes must be positive");
  }
  if (shifts_per_size < 1) throw ConfigError("shifts_per_size must be at least 1");
  for (std::size_t k : subset_counts) {
    if (k < 1) throw ConfigError("subset_counts must be positive");
  }
  if (!(k_variance > 0.0)) throw ConfigError("k_variance must be positive");
  for (double b : b_grid) {
    if (!(b > 0.0)) throw ConfigError("b_grid values must be positive");
  }
  if (!(d_mp > 0.0)) throw ConfigError("d_mp must be positive");
  for (int n : photon_numbers) {
    if (n < 2 || n > kMaxPhotons) throw ConfigError("photon_numbers must lie in [2, 4]");
  }
  for (double a : alpha_grid) {
    if (!(a >= 0.0)) throw ConfigError("alpha_grid values must be non-negative");
  }
  if (!(cat_alpha_for_phi >= 0.0)) throw ConfigError("cat_alpha_for_phi must be non-negative");
  if (!(cat_detector_size > 0.0)) throw ConfigError("cat_detector_size must be positive");
  (void)model;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["state"] = state;
  j["n_events"] = n_events;
  j["seed"] = seed;
  j["detector"] = {{"d0_min", detector.d0_min},
                   {"size_multipliers", detector.size_multipliers},
                   {"rho", detector.rho ? nlohmann::json(*detector.rho) : nlohmann::json()}};
  j["method"] = to_string(method);
  j["window"] = window ? nlohmann::json::array({window->lo, window->hi}) : nlohmann::json();
  j["output_dir"] = output_dir;
  j["shift_sizes"] = shift_sizes;
  j["shifts_per_size"] = shifts_per_size;
  j["subset_counts"] = subset_counts;
  j["k_variance"] = k_variance;
  j["b_grid"] = b_grid;
  j["d_mp"] = d_mp;
  j["coincidence_rule"] = to_string(coincidence_rule);
  j["photon_numbers"] = photon_numbers;
  j["alpha_grid"] = alpha_grid;
  j["phi_grid"] = phi_grid;
  j["cat_alpha_for_phi"] = cat_alpha_for_phi;
  j["cat_detector_size"] = cat_detector_size;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  Fields f(j, "config");
  if (const auto* s = f.get("state")) {
    StateModel::from_json(*s);
    c.state = *s;
  }
  f.read("n_events", c.n_events);
  f.read("seed", c.seed);
  if (const auto* d = f.get("detector")) {
    Fields fd(*d, "detector");
    fd.read("d0_min", c.detector.d0_min);
    fd.read("size_multipliers", c.detector.size_multipliers);
    double rho = 0.0;
    if (fd.get("rho")) {
      fd.read("rho", rho);
      c.detector.rho = rho;
    }
    fd.reject_unknown();
  }
  if (const auto* m = f.get("method")) {
    if (!m->is_string()) throw ConfigError("config.method must be a string");
    c.method = parse_method(m->get<std::string>());
  }
  if (const auto* w = f.get("window")) {
    if (!w->is_array() || w->size() != 2 || !(*w)[0].is_number() || !(*w)[1].is_number()) {
      throw ConfigError("config.window must be [lo, hi]");
    }
    c.window = Window{(*w)[0].get<double>(), (*w)[1].get<double>()};
  }
  f.read("output_dir", c.output_dir);
  f.read("shift_sizes", c.shift_sizes);
  f.read("shifts_per_size", c.shifts_per_size);
  f.read("subset_counts", c.subset_counts);
  f.read("k_variance", c.k_variance);
  f.read("b_grid", c.b_grid);
  f.read("d_mp", c.d_mp);
  if (const auto* r = f.get("coincidence_rule")) {
    if (!r->is_string()) throw ConfigError("config.coincidence_rule must be a string");
    c.coincidence_rule = parse_coincidence_rule(r->get<std::string>());
  }
  f.read("photon_numbers", c.photon_numbers);
  f.read("alpha_grid", c.alpha_grid);
  f.read("phi_grid", c.phi_grid);
  f.read("cat_alpha_for_phi", c.cat_alpha_for_phi);
  f.read("cat_detector_size", c.cat_detector_size);
  f.reject_unknown();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Building blocks

std::vector<SizeSweepRow> sweep_size(const EventBatch& batch, const StateModel& state,
                                     double d0_min, const std::vector<int>& multipliers,
                                     Method method, double rho, Window window, int threads) {
  std::vector<SizeSweepRow> rows;
  rows.reserve(multipliers.size());
  for (int m : multipliers) {
    const ShiftPlan plan{d0_min, m, method, rho, 0.0};
    const CentroidHistogram hist = run_plan(batch, plan, threads);
    const RecoveryReport report = recover(hist, state, window);
    rows.push_back({plan.detector_size(), m, report.rms, report.scale, report.b, hist.excluded});
  }
  return rows;
}

std::vector<ShiftSweepRow> sweep_shift(const EventBatch& batch, const StateModel& state,
                                       const std::vector<double>& sizes, int shifts_per_size,
                                       double rho, Window window, int threads) {
  if (shifts_per_size < 1) throw ConfigError("shifts_per_size must be at least 1");
  std::vector<ShiftSweepRow> rows;
  for (double size : sizes) {
    for (int j = 0; j < shifts_per_size; ++j) {
      const double shift = size * j / shifts_per_size;
      const ShiftPlan plan{size, 1, Method::I, rho, shift};
      const RecoveryReport report = recover(run_plan(batch, plan, threads), state, window);
      rows.push_back({size, shift, report.rms});
    }
  }
  return rows;
}

std::vector<SubsetRow> sweep_subsets(const EventBatch& batch, const StateModel& state,
                                     const std::vector<std::size_t>& subset_counts, double d0_min,
                                     const std::vector<int>& multipliers, Method method,
                                     double rho, Window window, int threads) {
  std::vector<SubsetRow> rows;
  for (std::size_t k : subset_counts) {
    const SplitResult split = split_batch(batch, k);
    std::vector<std::vector<double>> per_part;
    for (const auto& part : split.parts) {
      std::vector<double> rms;
      for (const auto& r : sweep_size(part, state, d0_min, multipliers, method, rho, window, threads)) {
        rms.push_back(r.rms);
      }
      per_part.push_back(std::move(rms));
    }
    for (std::size_t i = 0; i < multipliers.size(); ++i) {
      double sum = 0.0;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& rms : per_part) {
        sum += rms[i];
        lo = std::min(lo, rms[i]);
        hi = std::max(hi, rms[i]);
      }
      rows.push_back({k, multipliers[i] * d0_min, sum / static_cast<double>(per_part.size()), lo, hi});
    }
  }
  return rows;
}

std::vector<double> default_b_grid(int n_photons, double k_variance, int points) {
  if (points < 2) throw ConfigError("B grid needs at least 2 points");
  const double r_max = 0.98 * std::sqrt(static_cast<double>(n_photons));
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) {
    const double r = 1.0 + (r_max - 1.0) * i / (points - 1);
    grid.push_back(r * std::sqrt(k_variance / n_photons));
  }
  return grid;
}

std::vector<MpaRow> mpa_sweep(int n_photons, double k_variance, const std::vector<double>& b_grid,
                              std::size_t n_events, std::uint64_t seed, double d_mp,
                              CoincidenceRule rule, int threads) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto classical = JointGaussianState::from_k_variance(
      n_photons, k_variance, std::sqrt(k_variance / n_photons));
  const double rate_at_r1 =
      close_event_analysis(sample_events(classical, n_events, seed, threads), d_mp, rule).raw_rate;
  std::vector<MpaRow> rows;
  for (double b : b_grid) {
    const auto state = JointGaussianState::from_k_variance(n_photons, k_variance, b);
    const JgScalars s = jg_scalars(state);
    CloseEventReport rep =
        close_event_analysis(sample_events(state, n_events, seed, threads), d_mp, rule);
    rep.normalize(rate_at_r1);
    MpaRow row{b,           state.beta_width(), s.r,  rep.n_close,   rep.n_total, rep.r_tot,
               rep.r_peak,  rep.width_w,        rep.width_rms, nan, nan,       s.w_classical,
               s.w_min};
    if (s.r >= 1.0 - 1e-12 && s.r <= std::sqrt(static_cast<double>(n_photons)) + 1e-12) {
      const auto theory = theoretical_rates(n_photons, s.r);
      row.r_tot_theory = theory.r_tot;
      row.r_peak_theory = theory.r_peak;
    }
    rows.push_back(row);
  }
  return rows;
}

JointGaussianState fixed_feature_state(int n_photons) {
  const double beta = n_photons == 4 ? 0.8 : 1.0;
  return JointGaussianState(n_photons, 2.0 / n_photons, beta);
}

std::vector<CatRow> cat_sweep(const std::vector<double>& alpha_mags,
                              const std::vector<double>& phases, double detector_size,
                              std::size_t n_events, std::uint64_t seed, double rho, Window window,
                              int threads) {
  std::vector<CatRow> rows;
  const ShiftPlan plan{detector_size, 1, Method::I, rho, 0.0};
  for (double phase : phases) {
    for (double mag : alpha_mags) {
      const StateModel state(CatState(mag, phase));
      const auto batch = sample_events(state, n_events, seed, threads);
      const auto report = recover(run_plan(batch, plan, threads), state, window);
      rows.push_back({mag, phase, report.rms});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Commands

CommandOutput cmd_sample(const ExperimentConfig& config, int threads) {
  config.validate();
  const auto dir = prepare_output_dir(config);
  const StateModel state = config.state_model();
  const EventBatch batch = sample_events(state, config.n_events, config.seed, threads);
  const auto path = dir / "events.csv";
  const std::vector<std::string> extra = {"config_hash=" + config.hash()};
  write_event_csv(path, batch, extra);
  std::ostringstream summary;
  summary << "sampled N=" << state.n_photons() << " N0=" << batch.n_events()
          << " seed=" << config.seed << " -> " << path.string();
  return {{path}, summary.str()};
}

CommandOutput cmd_sweep_size(const ExperimentConfig& config, int threads) {
  config.validate();
  const auto dir = prepare_output_dir(config);
  const StateModel state = config.state_model();
  const EventBatch batch = sample_events(state, config.n_events, config.seed, threads);
  const auto rows = sweep_size(batch, state, config.detector.d0_min, config.detector.size_multipliers,
                               config.method, config.rho(), config.comparison_window(), threads);
  std::vector<Row> table;
  for (const auto& r : rows) {
    table.push_back({num(r.detector_size), num(r.rms), to_string(config.method),
                     std::to_string(r.multiplier), num(r.scale), std::to_string(r.b),
                     std::to_string(r.excluded)});
  }
  const auto path = dir / "sweep_size.csv";
  write_table(path, config, "sweep-size",
              {"detector_size", "rms", "method", "n_shifts", "scale", "b", "excluded"}, table);
  return {{path}, "wrote " + std::to_string(rows.size()) + " sizes to " + path.string()};
}

CommandOutput cmd_sweep_shift(const ExperimentConfig& config, int threads) {
  config.validate();
  if (config.shift_sizes.empty()) throw ConfigError("shift_sizes is empty");
  const auto dir = prepare_output_dir(config);
  const StateModel state = config.state_model();
  const EventBatch batch = sample_events(state, config.n_events, config.seed, threads);
  const auto rows = sweep_shift(batch, state, config.shift_sizes, config.shifts_per_size,
                                config.rho(), config.comparison_window(), threads);
  std::vector<Row> table;
  for (const auto& r : rows) table.push_back({num(r.detector_size), num(r.shift), num(r.rms)});
  const auto path = dir / "sweep_shift.csv";
  write_table(path, config, "sweep-shift", {"detector_size", "shift", "rms"}, table);
  return {{path}, "wrote " + std::to_string(rows.size()) + " (size, shift) cells to " + path.string()};
}

CommandOutput cmd_subsets(const ExperimentConfig& config, int threads) {
  config.validate();
  if (config.subset_counts.empty()) throw ConfigError("subset_counts is empty");
  for (std::size_t k : config.subset_counts) {
    if (k > config.n_events) throw ConfigError("subset_counts must not exceed n_events");
  }
  const auto dir = prepare_output_dir(config);
  const StateModel state = config.state_model();
  const EventBatch batch = sample_events(state, config.n_events, config.seed, threads);
  const auto rows = sweep_subsets(batch, state, config.subset_counts, config.detector.d0_min,
                                  config.detector.size_multipliers, config.method, config.rho(),
                                  config.comparison_window(), threads);
  std::vector<Row> table;
  for (const auto& r : rows) {
    table.push_back({std::to_string(r.parts), std::to_string(config.n_events / r.parts),
                     num(r.detector_size), num(r.mean_rms), num(r.min_rms), num(r.max_rms)});
  }
  const auto path = dir / "subsets.csv";
  write_table(path, config, "subsets",
              {"parts", "events_per_part", "detector_size", "mean_rms", "min_rms", "max_rms"}, table);
  return {{path}, "wrote " + std::to_string(rows.size()) + " rows to " + path.string()};
}

CommandOutput cmd_mpa(const ExperimentConfig& config, int threads) {
  config.validate();
  const auto dir = prepare_output_dir(config);
  const int n = config.state_model().n_photons();
  const auto grid = config.b_grid.empty() ? default_b_grid(n, config.k_variance) : config.b_grid;
  const auto rows = mpa_sweep(n, config.k_variance, grid, config.n_events, config.seed,
                              config.d_mp, config.coincidence_rule, threads);
  std::vector<Row> table;
  for (const auto& r : rows) {
    table.push_back({num(r.b), num(r.beta), num(r.r), std::to_string(r.n_close),
                     std::to_string(r.n_total), num(r.r_tot), num(r.r_peak), num(r.width_w),
                     num(r.width_rms), num(r.r_tot_theory), num(r.r_peak_theory),
                     num(r.w_classical), num(r.w_min)});
  }
  const auto path = dir / "mpa.csv";
  write_table(path, config, "mpa",
              {"b", "beta", "r", "n_close", "n_total", "r_tot", "r_peak", "width_w", "width_rms",
               "r_tot_theory", "r_peak_theory", "w_classical", "w_min"},
              table);
  return {{path}, "wrote " + std::to_string(rows.size()) + " B values to " + path.string()};
}

CommandOutput cmd_fixed_feature(const ExperimentConfig& config, int threads) {
  config.validate();
  const auto dir = prepare_output_dir(config);
  // The envelope is exp(-8 X^2) for every N, so one range serves all states.
  const double rho = config.detector.rho.value_or(3.5);
  const Window window = config.window.value_or(Window{-1.75, 1.75});
  std::vector<Row> table;
  for (int n : config.photon_numbers) {
    const StateModel state(fixed_feature_state(n));
    const auto batch = sample_events(state, config.n_events, config.seed, threads);
    for (const auto& r : sweep_size(batch, state, config.detector.d0_min,
                                    config.detector.size_multipliers, config.method, rho, window,
                                    threads)) {
      table.push_back({std::to_string(n), num(r.detector_size), num(r.rms),
                       to_string(config.method), std::to_string(r.multiplier)});
    }
  }
  const auto path = dir / "fixed_feature.csv";
  write_table(path, config, "fixed-feature", {"n", "detector_size", "rms", "method", "n_shifts"},
              table);
  return {{path}, "wrote " + std::to_string(table.size()) + " rows to " + path.string()};
}

CommandOutput cmd_cat(const ExperimentConfig& config, int threads) {
  config.validate();
  const auto dir = prepare_output_dir(config);
  const double rho = config.detector.rho.value_or(7.0);
  const Window window = config.window.value_or(Window{-3.5, 3.5});
  const double half_pi = std::numbers::pi / 2.0;

  const auto by_alpha = cat_sweep(config.alpha_grid, {half_pi}, config.cat_detector_size,
                                  config.n_events, config.seed, rho, window, threads);
  const auto by_phi = cat_sweep({config.cat_alpha_for_phi}, config.phi_grid,
                                config.cat_detector_size, config.n_events, config.seed, rho,
                                window, threads);
  std::vector<Row> alpha_table, phi_table;
  for (const auto& r : by_alpha) alpha_table.push_back({num(r.alpha_mag), num(r.alpha_phase), num(r.rms)});
  for (const auto& r : by_phi) phi_table.push_back({num(r.alpha_mag), num(r.alpha_phase), num(r.rms)});
  const auto alpha_path = dir / "cat_alpha.csv";
  const auto phi_path = dir / "cat_phi.csv";
  write_table(alpha_path, config, "cat", {"alpha_mag", "alpha_phase", "rms"}, alpha_table);
  write_table(phi_path, config, "cat", {"alpha_mag", "alpha_phase", "rms"}, phi_table);

  // Analytic centroid profiles: |alpha| = 1 and sqrt(2) at phi = pi/2, then the phi grid.
  std::vector<StateModel> profiles = {StateModel(CatState(1.0, half_pi)),
                                      StateModel(CatState(std::numbers::sqrt2, half_pi))};
  Row columns = {"X", "alpha_1_phi_pi_2", "alpha_sqrt2_phi_pi_2"};
  for (double phi : config.phi_grid) {
    profiles.emplace_back(CatState(config.cat_alpha_for_phi, phi));
    columns.push_back("alpha_" + num(config.cat_alpha_for_phi) + "_phi_" + num(phi));
  }
  std::vector<Row> profile_table;
  for (int i = -400; i <= 400; ++i) {
    const double x = i * 0.001;
    Row row = {num(x)};
    for (const auto& s : profiles) row.push_back(num(centroid_reference(s, x)));
    profile_table.push_back(std::move(row));
  }
  const auto profile_path = dir / "cat_profiles.csv";
  write_table(profile_path, config, "cat", columns, profile_table);
  return {{alpha_path, phi_path, profile_path},
          "wrote |alpha| sweep, phi sweep and profiles to " + dir.string()};
}

}  // namespace centroid
