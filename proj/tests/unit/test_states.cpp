#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "centroid/error.hpp"
#include "centroid/states.hpp"

using namespace centroid;

namespace {

constexpr double kPi = std::numbers::pi;

// exp(-2 x^T B^-1 x) with B assembled entry by entry and inverted densely.
double jg_density_dense(int n, double b, double beta, std::span<const double> xs) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      m(i, j) = i == j ? 1.0 / (n * n * b * b) + (1.0 - 1.0 / n) / (beta * beta)
                       : 1.0 / (n * n * b * b) - 1.0 / (n * beta * beta);
    }
  }
  const Eigen::MatrixXd inv = m.inverse();
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = xs[i];
  return std::exp(-2.0 * x.dot(inv * x));
}

int count_local_maxima(const std::function<double(double)>& f, double lo, double hi, double step) {
  int count = 0;
  const int n = static_cast<int>(std::round((hi - lo) / step));
  for (int i = 1; i < n; ++i) {
    const double x = lo + i * step;
    const double v = f(x);
    if (v > f(x - step) && v >= f(x + step)) ++count;
  }
  return count;
}

}  // namespace

TEST_SUITE("states") {
  TEST_CASE("NOON density examples") {
    const NoonState s(2);
    const std::array<double, 2> origin{0.0, 0.0};
    CHECK(noon_density(s, origin) == doctest::Approx(s.prefactor()).epsilon(1e-15));
    const std::array<double, 2> zero{0.125, 0.125};
    CHECK(noon_density(s, zero) == doctest::Approx(0.0).epsilon(1e-30));
    const std::array<double, 3> wrong{0, 0, 0};
    CHECK_THROWS_AS(noon_density(s, wrong), ConfigError);
  }

  TEST_CASE("NOON N=2 density integrates to one") {
    const NoonState s(2);
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    // Gaussian sd is 2 lambda per coordinate; 10 sd leaves nothing measurable outside.
    const double r = 20.0;
    auto inner = [&](double x1) {
      return GK::integrate(
          [&](double x2) {
            const std::array<double, 2> xs{x1, x2};
            return noon_density(s, xs);
          },
          -r, r, 20, 1e-12);
    };
    const double total = GK::integrate(inner, -r, r, 20, 1e-12);
    CHECK(std::abs(total - 1.0) < 1e-6);
  }

  TEST_CASE("jointly Gaussian density against dense inversion") {
    const JointGaussianState s(2, 1.0, 1.0);
    const std::array<double, 2> origin{0.0, 0.0};
    CHECK(jg_density(s, origin) == 1.0);
    for (double t : {0.1, 0.3, 0.7}) {
      const std::array<double, 2> xs{t, -t};
      CHECK(jg_density(s, xs) == doctest::Approx(std::exp(-4.0 * t * t)).epsilon(1e-13));
      CHECK(jg_density(s, xs) == doctest::Approx(jg_density_dense(2, 1.0, 1.0, xs)).epsilon(1e-12));
    }
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (int n = 2; n <= 4; ++n) {
      const JointGaussianState g(n, 0.8, 1.3);
      for (int k = 0; k < 20; ++k) {
        std::array<double, 4> xs{u(rng), u(rng), u(rng), u(rng)};
        const std::span<const double> v(xs.data(), n);
        CHECK(jg_density(g, v) == doctest::Approx(jg_density_dense(n, 0.8, 1.3, v)).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("jointly Gaussian rejects non-positive-definite B") {
    CHECK_THROWS_AS(JointGaussianState(2, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(JointGaussianState(2, 1.0, -1.0), ConfigError);
    try {
      JointGaussianState(3, -0.5, 1.0);
      FAIL("expected an exception");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("eigenvalue") != std::string::npos);
    }
    CHECK_THROWS_AS(JointGaussianState::from_k_variance(2, 1.0, 1.5), ConfigError);
  }

  TEST_CASE("jointly Gaussian scalars") {
    const auto s = jg_scalars(JointGaussianState(2, 1.0, 1.0));
    CHECK(s.k_variance == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(s.r == doctest::Approx(std::sqrt(2.0) / std::sqrt(1.5)).epsilon(1e-14));
    CHECK(s.r == doctest::Approx(1.1547).epsilon(1e-4));
    for (int n = 2; n <= 4; ++n) {
      const double beta = 1.3;
      const auto classical = jg_scalars(JointGaussianState(n, beta / std::sqrt(double(n)), beta));
      CHECK(classical.r == doctest::Approx(1.0).epsilon(1e-14));
      const auto heisenberg = jg_scalars(JointGaussianState(n, 1.0, 1e-8));
      CHECK(heisenberg.r == doctest::Approx(std::sqrt(double(n))).epsilon(1e-12));
      CHECK(classical.w_min < classical.w_classical);
    }
  }

  TEST_CASE("jointly Gaussian centroid rms lies between the width limits") {
    for (int n = 2; n <= 4; ++n) {
      const double k_var = 1.0;
      const double b_lo = std::sqrt(k_var / n);
      for (double frac : {0.0, 0.3, 0.6, 0.9}) {
        const double b = b_lo + frac * (std::sqrt(k_var) - b_lo) * 0.999;
        const auto st = JointGaussianState::from_k_variance(n, k_var, b);
        const auto sc = jg_scalars(st);
        const double rms = 1.0 / (2.0 * n * b);
        CHECK(rms <= sc.w_classical * (1 + 1e-12));
        CHECK(rms >= sc.w_min * (1 - 1e-12));
        CHECK(st.admissible());
      }
    }
  }

  TEST_CASE("cat density special case and zeros") {
    const CatState s(1.0, kPi / 2);
    const double peak = cat_density(s, 0.0, 0.0);
    CHECK(peak == doctest::Approx(4 * s.normalization() * s.normalization() / kPi).epsilon(1e-14));
    const double sum = 1.0 / (4.0 * std::sqrt(2.0));
    CHECK(cat_density(s, sum / 2, sum / 2) < 1e-30);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (double mag : {0.3, 1.0, 2.5, 4.0}) {
      const CatState c(mag, kPi / 2);
      for (int k = 0; k < 100; ++k) {
        const double x1 = u(rng), x2 = u(rng);
        CHECK(std::abs(cat_density(c, x1, x2) - cat_density_imaginary_alpha(c, x1, x2)) < 1e-12);
      }
    }
  }

  TEST_CASE("cat density stays finite for large real alpha") {
    const CatState c(8.0, 0.0);
    for (double x : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      const double v = cat_density(c, x, x);
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
    }
  }

  TEST_CASE("cat normalization and photon numbers") {
    for (double mag : {0.0, 0.1, 1.0, 3.0}) {
      const CatState c(mag, 0.4);
      CHECK(c.normalization() >= 0.5);
      CHECK(c.normalization() <= 1.0 / std::sqrt(2.0) + 1e-15);
      double total = 0.0;
      for (int n1 = 0; n1 <= 60; ++n1) {
        for (int n2 = 0; n2 <= 60; ++n2) {
          const double p = photon_number_probability(c, n1, n2);
          if ((n1 + n2) % 2 == 1) CHECK(p == 0.0);
          total += p;
        }
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
    const CatState i_alpha(1.0, kPi / 2);
    const double expected = 2 * std::exp(-2.0) / (1 + std::exp(-4.0));
    CHECK(photon_number_probability(i_alpha, 0, 0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(photon_number_probability(i_alpha, 0, 0) == doctest::Approx(0.26582).epsilon(1e-4));
  }

  TEST_CASE("densities are even and non-negative") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const std::vector<StateModel> states = {NoonState(2), NoonState(3), NoonState(4),
                                            JointGaussianState(3, 0.7, 1.1),
                                            CatState(1.5, 0.3)};
    for (const auto& s : states) {
      for (int k = 0; k < 200; ++k) {
        std::array<double, 4> xs{u(rng), u(rng), u(rng), u(rng)};
        std::array<double, 4> neg{-xs[0], -xs[1], -xs[2], -xs[3]};
        const std::span<const double> a(xs.data(), s.n_photons());
        const std::span<const double> b(neg.data(), s.n_photons());
        CHECK(s.density(a) >= 0.0);
        CHECK(s.density(a) == doctest::Approx(s.density(b)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("densities factorize into centroid and relative parts") {
    // Exchanging the relative parts of two events with equal coordinate sums
    // leaves the product of densities unchanged.
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    const std::vector<StateModel> states = {NoonState(2), NoonState(3), JointGaussianState(3, 0.9, 1.4),
                                            CatState(1.2, kPi / 2)};
    for (const auto& s : states) {
      const int n = s.n_photons();
      for (int k = 0; k < 50; ++k) {
        const double c1 = u(rng), c2 = u(rng);
        std::array<double, 4> r1{}, r2{};
        double m1 = 0, m2 = 0;
        for (int i = 0; i < n; ++i) {
          r1[i] = u(rng);
          r2[i] = u(rng);
          m1 += r1[i];
          m2 += r2[i];
        }
        for (int i = 0; i < n; ++i) {
          r1[i] -= m1 / n;
          r2[i] -= m2 / n;
        }
        auto event = [&](double c, const std::array<double, 4>& r) {
          std::array<double, 4> x{};
          for (int i = 0; i < n; ++i) x[i] = c + r[i];
          return x;
        };
        const auto a = event(c1, r1), b = event(c2, r2), mix_a = event(c1, r2), mix_b = event(c2, r1);
        auto d = [&](const std::array<double, 4>& x) { return s.density(std::span<const double>(x.data(), n)); };
        CHECK(d(a) * d(b) == doctest::Approx(d(mix_a) * d(mix_b)).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("NOON centroid reference has 2N maxima per wavelength") {
    for (int n = 2; n <= 4; ++n) {
      const StateModel s{NoonState(n)};
      // Centre the counting interval between maxima so none sits on the boundary.
      const double half_period = 1.0 / (4.0 * n);
      const int maxima = count_local_maxima([&](double x) { return centroid_reference(s, x); },
                                            -0.5 + half_period, 0.5 + half_period, 1e-3);
      CHECK(maxima == 2 * n);
    }
    const StateModel jg{JointGaussianState(2, 1.0, 1.0)};
    CHECK(centroid_reference(jg, 0.0) == 1.0);
    CHECK(centroid_reference(jg, 0.25) ==
          doctest::Approx(std::exp(-2.0 * 4.0 * 0.0625)).epsilon(1e-14));
  }

  TEST_CASE("cat centroid profile at alpha = i sqrt(2) has more fringes than at alpha = i") {
    const StateModel a{CatState(1.0, kPi / 2)};
    const StateModel b{CatState(std::sqrt(2.0), kPi / 2)};
    auto fa = [&](double x) { return centroid_reference(a, x); };
    auto fb = [&](double x) { return centroid_reference(b, x); };
    CHECK(count_local_maxima(fb, -0.4, 0.4, 1e-4) > count_local_maxima(fa, -0.4, 0.4, 1e-4));
  }

  TEST_CASE("state JSON round trip and strict keys") {
    const std::vector<StateModel> states = {NoonState(3, 10.0), JointGaussianState(2, 0.5, 1.5),
                                            CatState(2.0, 0.25)};
    for (const auto& s : states) {
      const auto back = StateModel::from_json(s.to_json());
      CHECK(back.to_json() == s.to_json());
    }
    CHECK_THROWS_AS(StateModel::from_json({{"type", "noon"}, {"n", 2}, {"b", 1.0}}), ConfigError);
    CHECK_THROWS_AS(StateModel::from_json({{"type", "noon"}, {"n", 5}}), ConfigError);
    CHECK_THROWS_AS(StateModel::from_json({{"type", "cat"}, {"n", 3}, {"alpha_mag", 1.0}}),
                    ConfigError);
    CHECK_THROWS_AS(StateModel::from_json({{"type", "laser"}}), ConfigError);
    CHECK_THROWS_AS(StateModel::from_json({{"type", "jg"}, {"n", 2}, {"b", 1.0}}), ConfigError);
    const auto cat = StateModel::from_json({{"type", "cat"}, {"alpha_mag", 1.0}});
    CHECK(cat.get_if<CatState>()->alpha_phase() == doctest::Approx(kPi / 2));
  }
}
