#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <variant>

#include <json.hpp>

// Trial states for centroid measurements. All positions are dimensionless,
// measured in units of the transverse wavelength lambda; momenta in 1/lambda.

namespace centroid {

/// sigma = k0 / dk chosen so that dk << k0.
inline constexpr double kDefaultNoonSigma = 4.0 * std::numbers::sqrt2 * std::numbers::pi;

/// Largest photon number with a registered coordinate transform.
inline constexpr int kMaxPhotons = 4;

class NoonState {
 public:
  explicit NoonState(int n_photons, double sigma = kDefaultNoonSigma);

  int n_photons() const noexcept { return n_photons_; }
  double sigma() const noexcept { return sigma_; }
  /// Momentum spread dk = 2 pi / sigma in units of 1/lambda.
  double delta_k() const noexcept;
  /// Coefficient a of exp(-a * sum x_i^2); equals dk^2 = 4 pi^2 / sigma^2.
  double envelope_rate() const noexcept;
  /// 2 (dk / sqrt(pi))^N, the normalization in the dk << k0 limit.
  double prefactor() const noexcept;

 private:
  int n_photons_;
  double sigma_;
};

/// Jointly Gaussian N-photon state. The matrix B has eigenvalue 1/(N B^2) along
/// (1,...,1)/sqrt(N) and 1/beta^2 on the orthogonal complement; the position
/// density exp(-2 x^T B^-1 x) therefore only needs the two inverse eigenvalues.
class JointGaussianState {
 public:
  JointGaussianState(int n_photons, double b_width, double beta_width);

  /// Fixes <k_n^2> and solves beta^2 = (<k_n^2> - B^2) / (1 - 1/N).
  static JointGaussianState from_k_variance(int n_photons, double k_variance, double b_width);

  int n_photons() const noexcept { return n_photons_; }
  double b_width() const noexcept { return b_; }
  double beta_width() const noexcept { return beta_; }

  /// Eigenvalue of B^-1 along the symmetric direction: N B^2.
  double centroid_eigenvalue() const noexcept;
  /// Eigenvalue of B^-1 on every relative direction: beta^2.
  double relative_eigenvalue() const noexcept;

  /// True inside the classical-to-quantum range beta/sqrt(N) <= B <= sqrt(<k_n^2>).
  bool admissible() const noexcept;

 private:
  int n_photons_;
  double b_;
  double beta_;
};

/// Two-mode correlated coherent cat state N (|a>|a> + |-a>|-a>), a = |a| e^{i phi}.
/// Only events with one photon per mode are modelled, so N = 2.
class CatState {
 public:
  CatState(double alpha_mag, double alpha_phase, double x0 = 1.0);

  int n_photons() const noexcept { return 2; }
  double alpha_mag() const noexcept { return alpha_mag_; }
  double alpha_phase() const noexcept { return alpha_phase_; }
  double x0() const noexcept { return x0_; }
  /// 1 / sqrt(2 (1 + exp(-4 |a|^2))), in [1/2, 1/sqrt(2)].
  double normalization() const noexcept;

 private:
  double alpha_mag_;
  double alpha_phase_;
  double x0_;
};

class StateModel {
 public:
  using Variant = std::variant<NoonState, JointGaussianState, CatState>;

  StateModel(NoonState s) : state_(s) {}
  StateModel(JointGaussianState s) : state_(s) {}
  StateModel(CatState s) : state_(s) {}

  const Variant& variant() const noexcept { return state_; }
  int n_photons() const noexcept;
  /// "noon", "jg" or "cat".
  std::string type_name() const;

  /// Full N-photon position density at xs (length must equal n_photons()).
  double density(std::span<const double> xs) const;

  nlohmann::json to_json() const;
  /// Accepts {"type", "n", "sigma", "b", "beta", "alpha_mag", "alpha_phase"};
  /// any other key, or a key that does not apply to the type, is rejected.
  static StateModel from_json(const nlohmann::json& j);

  template <typename T>
  const T* get_if() const noexcept {
    return std::get_if<T>(&state_);
  }

 private:
  Variant state_;
};

double noon_density(const NoonState& state, std::span<const double> xs);
double jg_density(const JointGaussianState& state, std::span<const double> xs);
double cat_density(const CatState& state, double x1, double x2);

/// Closed form for a = i|a| (phi = pi/2): envelope times cos^2(2 pi sqrt2 |a| (x1 + x2)).
double cat_density_imaginary_alpha(const CatState& state, double x1, double x2);

/// The density on the diagonal, density(X, ..., X). Up to a constant factor this is
/// the centroid marginal for all three families; recovered histograms are
/// scale-fitted against it.
double centroid_reference(const StateModel& state, double centroid);

double photon_number_probability(const CatState& state, int n1, int n2);

struct JgScalars {
  double k_variance;   ///< <k_n^2> = B^2 + (1 - 1/N) beta^2
  double r;            ///< spot-size reduction factor sqrt(N) B / sqrt(<k_n^2>)
  double w_classical;  ///< 1 / (2 sqrt(N <k_n^2>))
  double w_min;        ///< 1 / (2 N sqrt(<k_n^2>))
};

JgScalars jg_scalars(const JointGaussianState& state);

}  // namespace centroid
