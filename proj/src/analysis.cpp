#include "centroid/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "centroid/error.hpp"

namespace centroid {

namespace {

void check_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    std::ostringstream msg;
    msg << "length mismatch: " << a.size() << " vs " << b.size();
    throw ConfigError(msg.str());
  }
  if (a.empty()) throw NumericalError("empty comparison");
}

}  // namespace

double fit_scale(std::span<const double> reference, std::span<const double> estimate) {
  check_same_length(reference, estimate);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    num += reference[i] * estimate[i];
    den += estimate[i] * estimate[i];
  }
  if (!(den > 0.0)) throw NumericalError("degenerate scale fit: estimate is zero everywhere");
  return num / den;
}

double rms_deviation(std::span<const double> reference, std::span<const double> scaled_estimate) {
  check_same_length(reference, scaled_estimate);
  double sum = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - scaled_estimate[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(reference.size()));
}

// ---------------------------------------------------------------------------
// Recovery

nlohmann::json RecoveryReport::to_json() const {
  return {{"scale", scale},
          {"rms", rms},
          {"b", b},
          {"window", {window.lo, window.hi}},
          {"metadata", metadata}};
}

RecoveryReport recover(const CentroidHistogram& histogram, const StateModel& state, Window window) {
  if (!(window.hi > window.lo)) throw ConfigError("comparison window must have lo < hi");
  constexpr double kSlack = 1e-9;
  RecoveryReport report;
  report.window = window;
  std::vector<double> reference;
  std::vector<double> estimate;
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    const double x = histogram.center(i);
    if (!histogram.reachable(i) || x < window.lo - kSlack || x > window.hi + kSlack) continue;
    reference.push_back(centroid_reference(state, x));
    estimate.push_back(static_cast<double>(histogram.counts()[i]));
  }
  if (reference.empty()) throw NumericalError("comparison window contains no histogram bin");
  report.scale = fit_scale(reference, estimate);
  report.points.reserve(reference.size());
  std::vector<double> scaled(estimate.size());
  for (std::size_t i = 0; i < reference.size(); ++i) {
    scaled[i] = report.scale * estimate[i];
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    const double x = histogram.center(i);
    if (!histogram.reachable(i) || x < window.lo - kSlack || x > window.hi + kSlack) continue;
    report.points.push_back({x, reference[k], estimate[k], scaled[k]});
    ++k;
  }
  report.rms = rms_deviation(reference, scaled);
  report.b = reference.size();
  report.metadata = {{"state", state.to_json()},
                     {"detector_size", histogram.detector_size},
                     {"method", histogram.method},
                     {"shifts", histogram.n_shifts},
                     {"shift_offset", histogram.offset()},
                     {"rho", histogram.rho},
                     {"bin_spacing", histogram.spacing()},
                     {"bin_stride", histogram.stride()},
                     {"excluded", histogram.excluded}};
  return report;
}

void write_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                  const RecoveryReport& report, std::span<const std::string> extra_header) {
  {
    std::ofstream out(json_path);
    if (!out) throw ConfigError("cannot open '" + json_path.string() + "' for writing");
    out << report.to_json().dump(2) << '\n';
  }
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + csv_path.string() + "' for writing");
  for (const auto& line : extra_header) out << "# " << line << '\n';
  out << "X,reference,raw_estimate,scaled_estimate\n";
  char buf[128];
  for (const auto& p : report.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.x, p.reference, p.raw_estimate,
                  p.scaled_estimate);
    out << buf;
  }
  if (!out) throw ConfigError("failed writing '" + csv_path.string() + "'");
}

double slope_estimate(std::span<const double> sizes, std::span<const double> rms_values, double lo,
                      double hi) {
  if (sizes.size() != rms_values.size()) throw ConfigError("sizes and rms values differ in length");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < lo || sizes[i] > hi) continue;
    sx += sizes[i];
    sy += rms_values[i];
    sxx += sizes[i] * sizes[i];
    sxy += sizes[i] * rms_values[i];
    ++n;
  }
  if (n < 3) {
    std::ostringstream msg;
    msg << "slope estimate needs at least 3 points in [" << lo << ", " << hi << "], got " << n;
    throw NumericalError(msg.str());
  }
  const double dn = static_cast<double>(n);
  const double var = sxx - sx * sx / dn;
  if (!(var > 0.0)) throw NumericalError("slope estimate: sizes in range are all equal");
  return (sxy - sx * sy / dn) / var;
}

// ---------------------------------------------------------------------------
// Close events

std::string to_string(CoincidenceRule rule) {
  return rule == CoincidenceRule::separation ? "separation" : "squared_separation";
}

CoincidenceRule parse_coincidence_rule(const std::string& text) {
  if (text == "separation") return CoincidenceRule::separation;
  if (text == "squared_separation") return CoincidenceRule::squared_separation;
  throw ConfigError("coincidence rule must be separation or squared_separation, got '" + text + "'");
}

double GaussianFit::width_w() const { return 2.0 / std::sqrt(2.0 * d); }
double GaussianFit::width_rms() const { return 1.0 / std::sqrt(2.0 * d); }

GaussianFit gaussian_fit(const CentroidHistogram& histogram) {
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    const double count = static_cast<double>(histogram.counts()[i]);
    if (!histogram.reachable(i) || count <= 0.0) continue;
    const double x = histogram.center(i);
    const double u = x * x;
    const double y = std::log(count);
    sw += count;
    sx += count * u;
    sy += count * y;
    sxx += count * u * u;
    sxy += count * u * y;
    ++used;
  }
  if (used < 10) {
    std::ostringstream msg;
    msg << "Gaussian fit needs at least 10 populated bins, got " << used;
    throw NumericalError(msg.str());
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) throw NumericalError("Gaussian fit is degenerate");
  const double slope = (sw * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / sw;
  if (!(slope < 0.0)) throw NumericalError("Gaussian fit produced a non-positive curvature d");
  return {std::exp(intercept), -slope};
}

void CloseEventReport::normalize(double rate_at_r1) {
  if (!(rate_at_r1 > 0.0)) throw NumericalError("close-event rate at r = 1 is zero");
  r_tot = raw_rate / rate_at_r1;
  r_peak = r_value * r_tot;
}

CloseEventReport close_event_analysis(const EventBatch& batch, double d_mp, CoincidenceRule rule) {
  if (!(d_mp > 0.0)) throw ConfigError("coincidence distance must be positive");
  CloseEventReport report;
  report.d_mp = d_mp;
  report.rule = rule;
  report.n_total = batch.n_events();
  report.r_tot = std::numeric_limits<double>::quiet_NaN();
  report.r_peak = std::numeric_limits<double>::quiet_NaN();
  report.r_value = std::numeric_limits<double>::quiet_NaN();
  try {
    const auto state = StateModel::from_json(batch.state_descriptor());
    if (const auto* jg = state.get_if<JointGaussianState>()) report.r_value = jg_scalars(*jg).r;
  } catch (const ConfigError&) {
    // Batches without a recognizable state still get counts and widths.
  }

  std::vector<double> centroids;
  const double n = batch.n_photons();
  for (std::size_t e = 0; e < batch.n_events(); ++e) {
    const auto row = batch.row(e);
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    const double spread = *hi - *lo;
    const bool close = rule == CoincidenceRule::separation ? spread <= d_mp : spread * spread <= d_mp;
    if (!close) continue;
    double sum = 0.0;
    for (double x : row) sum += x;
    centroids.push_back(sum / n);
  }
  report.n_close = centroids.size();
  report.raw_rate = report.n_total > 0 ? static_cast<double>(report.n_close) / report.n_total : 0.0;

  if (centroids.size() < 10) return report;
  double mean = 0.0;
  for (double c : centroids) mean += c;
  mean /= static_cast<double>(centroids.size());
  double var = 0.0;
  for (double c : centroids) var += (c - mean) * (c - mean);
  const double sd = std::sqrt(var / static_cast<double>(centroids.size() - 1));
  if (!(sd > 0.0)) return report;
  CentroidHistogram hist(sd / 4.0, 0.0, 4.0 * sd);
  for (double c : centroids) hist.add(c);
  try {
    const GaussianFit fit = gaussian_fit(hist);
    report.width_w = fit.width_w();
    report.width_rms = fit.width_rms();
    report.fit_ok = true;
  } catch (const NumericalError&) {
    report.fit_ok = false;
  }
  return report;
}

TheoreticalRates theoretical_rates(int n, double r) {
  if (n < 2) throw ConfigError("theoretical rates need N >= 2");
  const double limit = std::sqrt(static_cast<double>(n));
  constexpr double kSlack = 1e-12;
  if (!(r >= 1.0 - kSlack) || !(r <= limit + kSlack)) {
    std::ostringstream msg;
    msg << "reduction factor r = " << r << " outside [1, " << limit << "]";
    throw ConfigError(msg.str());
  }
  // sqrt(N)^2 need not round back to N; the endpoint is pinned to zero.
  const double base = r >= limit * (1.0 - kSlack) ? 0.0 : std::max(0.0, (n - r * r) / (n - 1.0));
  const double r_tot = std::pow(base, (n - 1.0) / 2.0);
  return {r_tot, r * r_tot};
}

}  // namespace centroid
