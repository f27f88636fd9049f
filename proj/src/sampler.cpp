#include "centroid/sampler.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "centroid/error.hpp"
#include "centroid/parallel.hpp"
#include "centroid/rng.hpp"

namespace centroid {

namespace {

constexpr double kPi = std::numbers::pi;
// Half-width of the inverse-CDF table in envelope standard deviations beyond the peak.
constexpr double kTailSigmas = 7.0;

}  // namespace

// ---------------------------------------------------------------------------
// TransformMatrix

void TransformMatrix::apply(std::span<const double> x, std::span<double> y) const {
  for (int r = 0; r < n; ++r) {
    double acc = 0.0;
    for (int c = 0; c < n; ++c) acc += at(r, c) * x[c];
    y[r] = acc;
  }
}

void TransformMatrix::apply_transpose(std::span<const double> y, std::span<double> x) const {
  for (int c = 0; c < n; ++c) {
    double acc = 0.0;
    for (int r = 0; r < n; ++r) acc += at(r, c) * y[r];
    x[c] = acc;
  }
}

TransformMatrix transform_matrix(int n) {
  const double s2 = std::numbers::sqrt2;
  const double s3 = std::numbers::sqrt3;
  TransformMatrix m;
  m.n = n;
  switch (n) {
    case 2:
      m.entries = {1 / s2, 1 / s2,  //
                   1 / s2, -1 / s2};
      break;
    case 3:
      m.entries = {1 / s3,       1 / s3,          1 / s3,            //
                   0.0,          1 / s2,          -1 / s2,           //
                   s2 / s3,      -1 / (s2 * s3),  -1 / (s2 * s3)};
      break;
    case 4: {
      const double a = std::sqrt(2.0 / 3.0);
      m.entries = {0.5,      0.5,            0.5,            0.5,             //
                   0.0,      0.0,            s2 / 2,         -s2 / 2,         //
                   0.0,      a,              -a / 2,         -a / 2,          //
                   s3 / 2,   -1 / (2 * s3),  -1 / (2 * s3),  -1 / (2 * s3)};
      break;
    }
    default: {
      std::ostringstream msg;
      msg << "no coordinate transform registered for N = " << n;
      throw ConfigError(msg.str());
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// EventBatch

EventBatch::EventBatch(int n_photons, std::vector<double> positions, std::uint64_t seed,
                       nlohmann::json state_descriptor, std::uint64_t first_event)
    : n_photons_(n_photons),
      positions_(std::move(positions)),
      seed_(seed),
      state_(std::move(state_descriptor)),
      first_event_(first_event) {
  if (n_photons < 1) throw ConfigError("event batch needs at least one photon per event");
  if (positions_.size() % static_cast<std::size_t>(n_photons) != 0) {
    throw ConfigError("event batch size is not a multiple of the photon number");
  }
  for (double x : positions_) {
    if (!std::isfinite(x)) throw NumericalError("event batch contains a non-finite position");
  }
}

EventBatch EventBatch::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > n_events()) throw ConfigError("slice exceeds event batch");
  const auto first = positions_.begin() + static_cast<std::ptrdiff_t>(begin * n_photons_);
  return EventBatch(n_photons_,
                    std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * n_photons_)),
                    seed_, state_, first_event_ + begin);
}

// ---------------------------------------------------------------------------
// Sampler

Sampler::Sampler(StateModel state, std::size_t grid_points)
    : state_(std::move(state)), transform_(transform_matrix(state_.n_photons())) {
  if (const auto* noon = state_.get_if<NoonState>()) {
    // exp(-a y^2) with a = dk^2 for every transformed coordinate.
    relative_sd_ = 1.0 / std::sqrt(2.0 * noon->envelope_rate());
    cdf_ = std::make_shared<TabulatedInverseCdf>(
        [this](double y) { return centroid_direction_density(y); }, kTailSigmas * relative_sd_,
        grid_points);
  } else if (const auto* jg = state_.get_if<JointGaussianState>()) {
    centroid_sd_ = 1.0 / (2.0 * std::sqrt(jg->centroid_eigenvalue()));
    relative_sd_ = 1.0 / (2.0 * std::sqrt(jg->relative_eigenvalue()));
  } else if (const auto* cat = state_.get_if<CatState>()) {
    relative_sd_ = 1.0 / (2.0 * kPi * std::numbers::sqrt2);
    const double peak = std::abs(cat->alpha_mag() * std::cos(cat->alpha_phase())) / kPi;
    cdf_ = std::make_shared<TabulatedInverseCdf>(
        [this](double y) { return centroid_direction_density(y); },
        peak + kTailSigmas * relative_sd_, grid_points);
  }
}

double Sampler::centroid_direction_density(double y) const {
  const int n = state_.n_photons();
  std::array<double, kMaxPhotons> xs{};
  const double x = y / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) xs[i] = x;
  return state_.density(std::span<const double>(xs.data(), n));
}

void Sampler::sample_event(std::uint64_t seed, std::uint64_t event_index,
                           std::span<double> out) const {
  const int n = transform_.n;
  EventStream stream(seed, event_index);
  std::array<double, kMaxPhotons> y{};
  y[0] = cdf_ ? cdf_->quantile(stream.uniform()) : centroid_sd_ * stream.normal();
  for (int i = 1; i < n; ++i) y[i] = relative_sd_ * stream.normal();
  transform_.apply_transpose(std::span<const double>(y.data(), n), out.first(n));
}

EventBatch Sampler::sample(std::size_t n_events, std::uint64_t seed, int threads,
                           std::uint64_t first_event) const {
  if (n_events < 1) throw ConfigError("number of events must be at least 1");
  const int n = state_.n_photons();
  std::vector<double> positions(n_events * static_cast<std::size_t>(n));
  parallel_ranges(n_events, threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t i = begin; i < end; ++i) {
      sample_event(seed, first_event + i,
                   std::span<double>(positions.data() + i * n, static_cast<std::size_t>(n)));
    }
  });
  return EventBatch(n, std::move(positions), seed, state_.to_json(), first_event);
}

EventBatch sample_events(const StateModel& state, std::size_t n_events, std::uint64_t seed,
                         int threads) {
  return Sampler(state).sample(n_events, seed, threads);
}

SplitResult split_batch(const EventBatch& batch, std::size_t parts) {
  if (parts < 1) throw ConfigError("number of parts must be at least 1");
  if (parts > batch.n_events()) {
    std::ostringstream msg;
    msg << "cannot split " << batch.n_events() << " events into " << parts << " parts";
    throw ConfigError(msg.str());
  }
  const std::size_t size = batch.n_events() / parts;
  SplitResult result;
  result.parts.reserve(parts);
  for (std::size_t p = 0; p < parts; ++p) result.parts.push_back(batch.slice(p * size, size));
  result.dropped = batch.n_events() - size * parts;
  return result;
}

// ---------------------------------------------------------------------------
// CSV persistence

void write_event_csv(const std::filesystem::path& path, const EventBatch& batch,
                     std::span<const std::string> extra_header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << "# state=" << batch.state_descriptor().dump() << '\n'
      << "# seed=" << batch.seed() << '\n'
      << "# n_photons=" << batch.n_photons() << '\n'
      << "# first_event=" << batch.first_event() << '\n';
  for (const auto& line : extra_header) out << "# " << line << '\n';
  std::array<char, 64> buf{};
  for (std::size_t i = 0; i < batch.n_events(); ++i) {
    const auto row = batch.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      const int len = std::snprintf(buf.data(), buf.size(), "%.17g", row[c]);
      if (c > 0) out << ',';
      out.write(buf.data(), len);
    }
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

namespace {

template <typename T>
T parse_number(std::string_view text, const std::string& what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("malformed " + what + ": '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

EventBatch read_event_csv(const std::filesystem::path& path, bool verify, int threads) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  nlohmann::json state;
  std::uint64_t seed = 0;
  std::uint64_t first_event = 0;
  int n_photons = 0;
  bool have_state = false, have_seed = false;
  std::vector<double> positions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string_view body = std::string_view(line).substr(line.size() > 1 ? 2 : 1);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = body.substr(0, eq);
      const auto value = body.substr(eq + 1);
      if (key == "state") {
        try {
          state = nlohmann::json::parse(value);
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError("malformed state header: " + std::string(e.what()));
        }
        have_state = true;
      } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(value, "seed");
        have_seed = true;
      } else if (key == "n_photons") {
        n_photons = parse_number<int>(value, "n_photons");
      } else if (key == "first_event") {
        first_event = parse_number<std::uint64_t>(value, "first_event");
      }
      continue;
    }
    if (n_photons < 1) throw ConfigError("event CSV lacks a valid '# n_photons=' header");
    std::string_view rest(line);
    int columns = 0;
    while (true) {
      const auto comma = rest.find(',');
      positions.push_back(parse_number<double>(rest.substr(0, comma), "position"));
      ++columns;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (columns != n_photons) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": expected " << n_photons << " columns, got "
          << columns;
      throw ConfigError(msg.str());
    }
  }
  if (!have_state || !have_seed) throw ConfigError("event CSV lacks state or seed header");
  if (n_photons < 1) throw ConfigError("event CSV lacks a valid '# n_photons=' header");
  EventBatch batch(n_photons, std::move(positions), seed, state, first_event);
  if (verify) {
    const Sampler sampler(StateModel::from_json(state));
    const EventBatch fresh = sampler.sample(batch.n_events(), seed, threads, first_event);
    const auto a = batch.positions();
    const auto b = fresh.positions();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) {
        std::ostringstream msg;
        msg << "verification failed: event " << i / n_photons << " differs from regenerated value";
        throw NumericalError(msg.str());
      }
    }
  }
  return batch;
}

}  // namespace centroid
