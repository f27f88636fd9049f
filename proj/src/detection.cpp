#include "centroid/detection.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "centroid/error.hpp"
#include "centroid/parallel.hpp"

namespace centroid {

namespace {

constexpr double kGridSlack = 1e-9;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

std::int64_t positive_mod(std::int64_t a, std::int64_t b) {
  const std::int64_t r = a % b;
  return r < 0 ? r + b : r;
}

}  // namespace

std::string to_string(Method method) { return method == Method::I ? "I" : "II"; }

Method parse_method(std::string_view text) {
  if (text == "I") return Method::I;
  if (text == "II") return Method::II;
  throw ConfigError("method must be I or II, got '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// DetectorArray / ShiftPlan

DetectorArray::DetectorArray(double d0, double shift, double rho)
    : d0_(d0), shift_(shift), rho_(rho) {
  if (!(d0 > 0.0) || !std::isfinite(d0)) throw ConfigError("detector size d0 must be positive");
  if (!std::isfinite(shift)) throw ConfigError("detector shift must be finite");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("evaluation extent rho must be positive");
}

std::int64_t DetectorArray::bins() const noexcept {
  return std::max<std::int64_t>(1, std::llround(rho_ / d0_));
}

void ShiftPlan::validate() const {
  if (!(base_size > 0.0) || !std::isfinite(base_size)) {
    throw ConfigError("base detector size must be positive");
  }
  if (multiplier < 1) throw ConfigError("size multiplier must be at least 1");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("evaluation extent rho must be positive");
  if (!std::isfinite(offset)) throw ConfigError("shift offset must be finite");
}

// ---------------------------------------------------------------------------
// CentroidHistogram

CentroidHistogram::CentroidHistogram(double spacing, double offset, double half_range, int stride)
    : spacing_(spacing), offset_(offset), half_range_(half_range), stride_(stride) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ConfigError("bin spacing must be positive");
  if (!(half_range > 0.0)) throw ConfigError("histogram range must be positive");
  if (stride < 1) throw ConfigError("histogram stride must be at least 1");
  k_min_ = static_cast<std::int64_t>(std::ceil((-half_range - offset) / spacing - kGridSlack));
  const auto k_max =
      static_cast<std::int64_t>(std::floor((half_range - offset) / spacing + kGridSlack));
  if (k_max < k_min_) throw ConfigError("histogram range holds no bin centre");
  counts_.assign(static_cast<std::size_t>(k_max - k_min_ + 1), 0);
}

double CentroidHistogram::center(std::size_t i) const noexcept {
  return offset_ + static_cast<double>(k_min_ + static_cast<std::int64_t>(i)) * spacing_;
}

bool CentroidHistogram::reachable(std::size_t i) const noexcept {
  return positive_mod(k_min_ + static_cast<std::int64_t>(i), stride_) == 0;
}

std::uint64_t CentroidHistogram::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

bool CentroidHistogram::add(double value) {
  const auto k = static_cast<std::int64_t>(std::floor((value - offset_) / spacing_ + 0.5));
  if (k < k_min_ || k > max_index()) {
    ++excluded;
    return false;
  }
  ++counts_[static_cast<std::size_t>(k - k_min_)];
  return true;
}

// ---------------------------------------------------------------------------
// Discretization

EventBatch discretize(const EventBatch& batch, const DetectorArray& array) {
  std::vector<double> positions(batch.positions().begin(), batch.positions().end());
  for (double& x : positions) x = array.outcome(array.index_of(x));
  return EventBatch(batch.n_photons(), std::move(positions), batch.seed(),
                    batch.state_descriptor(), batch.first_event());
}

double discrete_centroid(std::span<const double> row, const DetectorArray& array) {
  if (row.empty()) throw ConfigError("event row is empty");
  std::int64_t sum = 0;
  for (double x : row) {
    const double t = (x - array.shift()) / array.d0();
    const double i = std::round(t);
    if (std::abs(t - i) > 1e-6) {
      std::ostringstream msg;
      msg << "position " << x << " is not on the outcome lattice of detector size " << array.d0()
          << " and shift " << array.shift();
      throw ConfigError(msg.str());
    }
    sum += static_cast<std::int64_t>(i);
  }
  return array.shift() + array.d0() / static_cast<double>(row.size()) * static_cast<double>(sum);
}

// ---------------------------------------------------------------------------
// Shift plans

namespace {

// Pooled counts of fine-grid indices for one worker. Method I outcomes of one
// event form arithmetic progressions k = N j + m K with stride N, so they are
// accumulated with one difference array per residue class of k mod N.
class ProgressionAccumulator {
 public:
  ProgressionAccumulator(int n_photons, std::int64_t k_min, std::int64_t k_max)
      : n_(n_photons), k_min_(k_min), k_max_(k_max) {
    for (int r = 0; r < n_; ++r) {
      q_lo_[r] = ceil_div(k_min - r, n_);
      const std::int64_t q_hi = floor_div(k_max - r, n_);
      diff_[r].assign(static_cast<std::size_t>(std::max<std::int64_t>(q_hi - q_lo_[r] + 2, 1)), 0);
      q_hi_[r] = q_hi;
    }
  }

  /// Adds k_start, k_start + N, ..., length terms.
  void add(std::int64_t k_start, std::int64_t length) {
    const int r = static_cast<int>(positive_mod(k_start, n_));
    const std::int64_t q0 = floor_div(k_start - r, n_);
    const std::int64_t lo = std::max(q0, q_lo_[r]);
    const std::int64_t hi = std::min(q0 + length - 1, q_hi_[r]);
    if (hi >= lo) {
      diff_[r][static_cast<std::size_t>(lo - q_lo_[r])] += 1;
      diff_[r][static_cast<std::size_t>(hi + 1 - q_lo_[r])] -= 1;
      excluded_ += static_cast<std::uint64_t>(length - (hi - lo + 1));
    } else {
      excluded_ += static_cast<std::uint64_t>(length);
    }
  }

  void add_single(std::int64_t k) { add(k, 1); }

  void flush_into(std::span<std::uint64_t> counts, std::uint64_t& excluded) const {
    for (int r = 0; r < n_; ++r) {
      std::int64_t running = 0;
      for (std::int64_t q = q_lo_[r]; q <= q_hi_[r]; ++q) {
        running += diff_[r][static_cast<std::size_t>(q - q_lo_[r])];
        const std::int64_t k = r + q * n_;
        counts[static_cast<std::size_t>(k - k_min_)] += static_cast<std::uint64_t>(running);
      }
    }
    excluded += excluded_;
  }

 private:
  int n_;
  std::int64_t k_min_;
  std::int64_t k_max_;
  std::array<std::int64_t, kMaxPhotons> q_lo_{};
  std::array<std::int64_t, kMaxPhotons> q_hi_{};
  std::array<std::vector<std::int64_t>, kMaxPhotons> diff_;
  std::uint64_t excluded_ = 0;
};

// Detector index of x at shift j, written exactly as DetectorArray::index_of
// evaluates it for plan.array(j) so both paths agree bit for bit.
inline std::int64_t shifted_index(double x, const ShiftPlan& plan, double size, int j) {
  return static_cast<std::int64_t>(std::floor((x - plan.shift(j)) / size + 0.5));
}

void accumulate_event_all_shifts(std::span<const double> row, const ShiftPlan& plan,
                                 ProgressionAccumulator& acc) {
  const int n = static_cast<int>(row.size());
  const int m = plan.multiplier;
  const double size = plan.detector_size();
  std::array<int, kMaxPhotons> breaks{};
  std::int64_t k_sum = 0;
  bool monotone = true;
  for (int p = 0; p < n; ++p) {
    const double x = row[p];
    const std::int64_t i0 = shifted_index(x, plan, size, 0);
    k_sum += i0;
    // Across j = 0 .. m-1 the index drops by at most one; find where.
    if (m == 1 || shifted_index(x, plan, size, m - 1) == i0) {
      breaks[p] = m;
      continue;
    }
    if (shifted_index(x, plan, size, m - 1) != i0 - 1) {
      monotone = false;
      break;
    }
    const double t = (x - plan.offset) / size + 0.5;
    int c = std::clamp(static_cast<int>((t - std::floor(t)) * m) + 1, 1, m - 1);
    while (c > 1 && shifted_index(x, plan, size, c - 1) != i0) --c;
    while (c < m - 1 && shifted_index(x, plan, size, c) == i0) ++c;
    breaks[p] = c;
  }
  if (!monotone) {
    for (int j = 0; j < m; ++j) {
      std::int64_t k = 0;
      for (double x : row) k += shifted_index(x, plan, size, j);
      acc.add_single(static_cast<std::int64_t>(n) * j + m * k);
    }
    return;
  }
  std::sort(breaks.begin(), breaks.begin() + n);
  int start = 0;
  for (int r = 0; r <= n; ++r) {
    const int end = r < n ? breaks[r] : m;
    if (end > start) {
      acc.add(static_cast<std::int64_t>(n) * start + static_cast<std::int64_t>(m) * k_sum,
              end - start);
      start = end;
    }
    if (r < n) --k_sum;
  }
}

}  // namespace

CentroidHistogram run_plan(const EventBatch& batch, const ShiftPlan& plan, int threads) {
  plan.validate();
  const int n = batch.n_photons();
  if (n > kMaxPhotons) throw ConfigError("run_plan supports at most 4 photons per event");
  const int m = plan.multiplier;
  const std::size_t n_events = batch.n_events();
  if (n_events == 0) throw ConfigError("event batch is empty");
  const std::size_t chunk = plan.method == Method::II ? n_events / static_cast<std::size_t>(m) : n_events;
  if (chunk == 0) {
    std::ostringstream msg;
    msg << "method II with " << m << " shifts leaves empty chunks for " << n_events << " events";
    throw ConfigError(msg.str());
  }

  CentroidHistogram hist(plan.base_size / n, plan.offset, plan.rho / 2.0, std::gcd(n, m));
  hist.detector_size = plan.detector_size();
  hist.method = to_string(plan.method);
  hist.n_shifts = m;
  hist.rho = plan.rho;

  const std::size_t work = plan.method == Method::I ? n_events : chunk * static_cast<std::size_t>(m);
  std::vector<ProgressionAccumulator> partial;
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(work, 1))));
  partial.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) partial.emplace_back(n, hist.min_index(), hist.max_index());

  const double size = plan.detector_size();
  parallel_ranges(work, workers, [&](std::size_t begin, std::size_t end, int w) {
    auto& acc = partial[static_cast<std::size_t>(w)];
    for (std::size_t e = begin; e < end; ++e) {
      if (plan.method == Method::I) {
        accumulate_event_all_shifts(batch.row(e), plan, acc);
      } else {
        const int j = static_cast<int>(e / chunk);
        std::int64_t k = 0;
        for (double x : batch.row(e)) k += shifted_index(x, plan, size, j);
        acc.add_single(static_cast<std::int64_t>(n) * j + static_cast<std::int64_t>(m) * k);
      }
    }
  });
  for (const auto& acc : partial) acc.flush_into(hist.mutable_counts(), hist.excluded);
  return hist;
}

CentroidHistogram continuous_histogram(const EventBatch& batch, double spacing, double rho) {
  CentroidHistogram hist(spacing, 0.0, rho / 2.0);
  hist.detector_size = 0.0;
  hist.method = "continuous";
  hist.n_shifts = 1;
  hist.rho = rho;
  const double n = batch.n_photons();
  for (std::size_t e = 0; e < batch.n_events(); ++e) {
    double sum = 0.0;
    for (double x : batch.row(e)) sum += x;
    hist.add(sum / n);
  }
  return hist;
}

double multiphoton_fraction(const EventBatch& batch, const DetectorArray& array, int threads) {
  const std::size_t n_events = batch.n_events();
  if (n_events == 0) throw ConfigError("event batch is empty");
  const int workers = std::max(1, threads);
  std::vector<std::uint64_t> hits(static_cast<std::size_t>(workers), 0);
  parallel_ranges(n_events, workers, [&](std::size_t begin, std::size_t end, int w) {
    std::uint64_t local = 0;
    for (std::size_t e = begin; e < end; ++e) {
      const auto row = batch.row(e);
      const std::int64_t first = array.index_of(row[0]);
      bool same = true;
      for (std::size_t p = 1; p < row.size() && same; ++p) same = array.index_of(row[p]) == first;
      if (same) ++local;
    }
    hits[static_cast<std::size_t>(w)] = local;
  });
  const auto total = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
  return static_cast<double>(total) / static_cast<double>(n_events);
}

void write_histogram_csv(const std::filesystem::path& path, const CentroidHistogram& histogram,
                         std::span<const std::string> extra_header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", histogram.detector_size);
  out << "# d0=" << buf << '\n' << "# method=" << histogram.method << '\n'
      << "# shifts=" << histogram.n_shifts << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", histogram.rho);
  out << "# rho=" << buf << '\n' << "# excluded=" << histogram.excluded << '\n';
  for (const auto& line : extra_header) out << "# " << line << '\n';
  out << "bin_center_lambda,count\n";
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    if (!histogram.reachable(i)) continue;
    std::snprintf(buf, sizeof buf, "%.17g", histogram.center(i));
    out << buf << ',' << histogram.counts()[i] << '\n';
  }
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

}  // namespace centroid
