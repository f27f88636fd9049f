#include "centroid/states.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "centroid/error.hpp"

namespace centroid {

namespace {

constexpr double kPi = std::numbers::pi;

void check_photon_count(int n) {
  if (n < 2 || n > kMaxPhotons) {
    std::ostringstream msg;
    msg << "photon number " << n << " not supported (transforms are registered for N = 2.."
        << kMaxPhotons << ")";
    throw ConfigError(msg.str());
  }
}

double sum_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

double sum_of_squares(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return s;
}

void check_dimension(std::span<const double> xs, int n) {
  if (static_cast<int>(xs.size()) != n) {
    std::ostringstream msg;
    msg << "density expects " << n << " positions, got " << xs.size();
    throw ConfigError(msg.str());
  }
}

// log |cosh(z)|^2 for z = re + i im, using |cosh z|^2 = (cosh(2 re) + cos(2 im)) / 2.
double log_abs_cosh_sq(double re, double im) {
  const double t = 2.0 * std::abs(re);
  const double c = std::cos(2.0 * im);
  if (t < 1.0) return std::log(0.5 * (std::cosh(t) + c));
  const double e = std::exp(-t);
  return t - std::log(4.0) + std::log1p(e * e + 2.0 * c * e);
}

}  // namespace

// ---------------------------------------------------------------------------
// NoonState

NoonState::NoonState(int n_photons, double sigma) : n_photons_(n_photons), sigma_(sigma) {
  check_photon_count(n_photons);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("NOON sigma must be positive");
}

double NoonState::delta_k() const noexcept { return 2.0 * kPi / sigma_; }

double NoonState::envelope_rate() const noexcept {
  const double dk = delta_k();
  return dk * dk;
}

double NoonState::prefactor() const noexcept {
  return 2.0 * std::pow(delta_k() / std::sqrt(kPi), n_photons_);
}

// ---------------------------------------------------------------------------
// JointGaussianState

JointGaussianState::JointGaussianState(int n_photons, double b_width, double beta_width)
    : n_photons_(n_photons), b_(b_width), beta_(beta_width) {
  check_photon_count(n_photons);
  // Positive definiteness of B reduces to the two closed-form eigenvalues.
  const double centroid_ev = centroid_eigenvalue();
  const double relative_ev = relative_eigenvalue();
  if (!(b_width > 0.0) || !std::isfinite(centroid_ev)) {
    std::ostringstream msg;
    msg << "B matrix not positive definite: eigenvalue N B^2 = " << centroid_ev;
    throw ConfigError(msg.str());
  }
  if (!(beta_width > 0.0) || !std::isfinite(relative_ev)) {
    std::ostringstream msg;
    msg << "B matrix not positive definite: eigenvalue beta^2 = " << relative_ev;
    throw ConfigError(msg.str());
  }
}

JointGaussianState JointGaussianState::from_k_variance(int n_photons, double k_variance,
                                                       double b_width) {
  check_photon_count(n_photons);
  const double beta_sq = (k_variance - b_width * b_width) / (1.0 - 1.0 / n_photons);
  if (!(beta_sq > 0.0)) {
    std::ostringstream msg;
    msg << "B = " << b_width << " is inadmissible for <k_n^2> = " << k_variance
        << " (beta^2 = " << beta_sq << ")";
    throw ConfigError(msg.str());
  }
  return JointGaussianState(n_photons, b_width, std::sqrt(beta_sq));
}

double JointGaussianState::centroid_eigenvalue() const noexcept { return n_photons_ * b_ * b_; }

double JointGaussianState::relative_eigenvalue() const noexcept { return beta_ * beta_; }

bool JointGaussianState::admissible() const noexcept {
  const auto s = jg_scalars(*this);
  constexpr double kSlack = 1e-12;
  return b_ >= beta_ / std::sqrt(static_cast<double>(n_photons_)) * (1 - kSlack) &&
         b_ <= std::sqrt(s.k_variance) * (1 + kSlack);
}

// ---------------------------------------------------------------------------
// CatState

CatState::CatState(double alpha_mag, double alpha_phase, double x0)
    : alpha_mag_(alpha_mag), alpha_phase_(alpha_phase), x0_(x0) {
  if (!(alpha_mag >= 0.0) || !std::isfinite(alpha_mag)) {
    throw ConfigError("cat |alpha| must be non-negative");
  }
  if (!std::isfinite(alpha_phase)) throw ConfigError("cat phase must be finite");
  if (!(x0 > 0.0) || !std::isfinite(x0)) throw ConfigError("cat x0 must be positive");
}

double CatState::normalization() const noexcept {
  return 1.0 / std::sqrt(2.0 * (1.0 + std::exp(-4.0 * alpha_mag_ * alpha_mag_)));
}

// ---------------------------------------------------------------------------
// Densities

double noon_density(const NoonState& state, std::span<const double> xs) {
  check_dimension(xs, state.n_photons());
  const double c = std::cos(2.0 * kPi * sum_of(xs));
  return state.prefactor() * std::exp(-state.envelope_rate() * sum_of_squares(xs)) * c * c;
}

double jg_density(const JointGaussianState& state, std::span<const double> xs) {
  check_dimension(xs, state.n_photons());
  // Split x into its component along (1,...,1)/sqrt(N) and the orthogonal rest.
  const double n = state.n_photons();
  const double total = sum_of(xs);
  const double along_sq = total * total / n;
  const double rest_sq = std::max(0.0, sum_of_squares(xs) - along_sq);
  return std::exp(-2.0 * (state.centroid_eigenvalue() * along_sq +
                          state.relative_eigenvalue() * rest_sq));
}

double cat_density(const CatState& state, double x1, double x2) {
  const double mag = state.alpha_mag();
  const double phi = state.alpha_phase();
  const double norm = state.normalization();
  const double scale = 2.0 * kPi * std::numbers::sqrt2 * mag * (x1 + x2);
  const double log_prefactor = std::log(4.0 * norm * norm / (kPi * state.x0() * state.x0())) -
                               2.0 * mag * mag * (1.0 + std::cos(2.0 * phi));
  const double log_envelope = -4.0 * kPi * kPi * (x1 * x1 + x2 * x2);
  return std::exp(log_prefactor + log_envelope +
                  log_abs_cosh_sq(scale * std::cos(phi), scale * std::sin(phi)));
}

double cat_density_imaginary_alpha(const CatState& state, double x1, double x2) {
  const double norm = state.normalization();
  const double c =
      std::cos(2.0 * kPi * std::numbers::sqrt2 * state.alpha_mag() * (x1 + x2));
  return 4.0 * norm * norm / (kPi * state.x0() * state.x0()) *
         std::exp(-4.0 * kPi * kPi * (x1 * x1 + x2 * x2)) * c * c;
}

double centroid_reference(const StateModel& state, double centroid) {
  const std::array<double, kMaxPhotons> diag{centroid, centroid, centroid, centroid};
  return state.density(std::span<const double>(diag.data(), state.n_photons()));
}

double photon_number_probability(const CatState& state, int n1, int n2) {
  if (n1 < 0 || n2 < 0) throw ConfigError("photon numbers must be non-negative");
  if ((n1 + n2) % 2 != 0) return 0.0;
  const double mag = state.alpha_mag();
  const double norm = state.normalization();
  const int total = n1 + n2;
  if (mag == 0.0) return total == 0 ? 4.0 * norm * norm : 0.0;
  const double log_p = -2.0 * mag * mag + 2.0 * total * std::log(mag) - std::lgamma(n1 + 1.0) -
                       std::lgamma(n2 + 1.0);
  // [1 + (-1)^(n1+n2)] = 2 for even totals.
  return 4.0 * norm * norm * std::exp(log_p);
}

JgScalars jg_scalars(const JointGaussianState& state) {
  const double n = state.n_photons();
  const double b = state.b_width();
  const double beta = state.beta_width();
  JgScalars s{};
  s.k_variance = b * b + (1.0 - 1.0 / n) * beta * beta;
  s.r = std::sqrt(n) * b / std::sqrt(s.k_variance);
  s.w_classical = 1.0 / (2.0 * std::sqrt(n * s.k_variance));
  s.w_min = 1.0 / (2.0 * n * std::sqrt(s.k_variance));
  return s;
}

// ---------------------------------------------------------------------------
// StateModel

int StateModel::n_photons() const noexcept {
  return std::visit([](const auto& s) { return s.n_photons(); }, state_);
}

std::string StateModel::type_name() const {
  struct Visitor {
    std::string operator()(const NoonState&) const { return "noon"; }
    std::string operator()(const JointGaussianState&) const { return "jg"; }
    std::string operator()(const CatState&) const { return "cat"; }
  };
  return std::visit(Visitor{}, state_);
}

double StateModel::density(std::span<const double> xs) const {
  struct Visitor {
    std::span<const double> xs;
    double operator()(const NoonState& s) const { return noon_density(s, xs); }
    double operator()(const JointGaussianState& s) const { return jg_density(s, xs); }
    double operator()(const CatState& s) const {
      check_dimension(xs, 2);
      return cat_density(s, xs[0], xs[1]);
    }
  };
  return std::visit(Visitor{xs}, state_);
}

nlohmann::json StateModel::to_json() const {
  struct Visitor {
    nlohmann::json operator()(const NoonState& s) const {
      return {{"type", "noon"}, {"n", s.n_photons()}, {"sigma", s.sigma()}};
    }
    nlohmann::json operator()(const JointGaussianState& s) const {
      return {{"type", "jg"}, {"n", s.n_photons()}, {"b", s.b_width()}, {"beta", s.beta_width()}};
    }
    nlohmann::json operator()(const CatState& s) const {
      return {{"type", "cat"},
              {"n", 2},
              {"alpha_mag", s.alpha_mag()},
              {"alpha_phase", s.alpha_phase()}};
    }
  };
  return std::visit(Visitor{}, state_);
}

namespace {

void reject_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                 const std::string& type) {
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw ConfigError("state key '" + item.key() + "' is not valid for type '" + type + "'");
    }
  }
}

double number_at(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string("state is missing '") + key + "'");
  if (!it->is_number()) throw ConfigError(std::string("state '") + key + "' must be a number");
  return it->get<double>();
}

int integer_at(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string("state is missing '") + key + "'");
  if (!it->is_number_integer()) {
    throw ConfigError(std::string("state '") + key + "' must be an integer");
  }
  return it->get<int>();
}

}  // namespace

StateModel StateModel::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("state must be a JSON object");
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) {
    throw ConfigError("state requires a string 'type'");
  }
  const std::string type = type_it->get<std::string>();
  if (type == "noon") {
    reject_keys(j, {"type", "n", "sigma"}, type);
    const double sigma = j.contains("sigma") ? number_at(j, "sigma") : kDefaultNoonSigma;
    return NoonState(integer_at(j, "n"), sigma);
  }
  if (type == "jg") {
    reject_keys(j, {"type", "n", "b", "beta"}, type);
    return JointGaussianState(integer_at(j, "n"), number_at(j, "b"), number_at(j, "beta"));
  }
  if (type == "cat") {
    reject_keys(j, {"type", "n", "alpha_mag", "alpha_phase"}, type);
    if (j.contains("n") && integer_at(j, "n") != 2) {
      throw ConfigError("cat states are analysed for two-photon events only (n must be 2)");
    }
    const double phase = j.contains("alpha_phase") ? number_at(j, "alpha_phase") : kPi / 2.0;
    return CatState(number_at(j, "alpha_mag"), phase);
  }
  throw ConfigError("unknown state type '" + type + "' (expected noon, jg or cat)");
}

}  // namespace centroid
