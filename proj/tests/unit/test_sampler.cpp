#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "centroid/error.hpp"
#include "centroid/inverse_cdf.hpp"
#include "centroid/rng.hpp"
#include "centroid/sampler.hpp"
#include "support/oracles.hpp"

using namespace centroid;

namespace {

constexpr double kPi = std::numbers::pi;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("centroid_test_" + name);
}

double mean_of(const EventBatch& b, int col) {
  double s = 0;
  for (std::size_t i = 0; i < b.n_events(); ++i) s += b.row(i)[col];
  return s / b.n_events();
}

double var_of(const EventBatch& b, int col) {
  const double m = mean_of(b, col);
  double s = 0;
  for (std::size_t i = 0; i < b.n_events(); ++i) s += (b.row(i)[col] - m) * (b.row(i)[col] - m);
  return s / (b.n_events() - 1);
}

// Pearson chi-square of the (x1, x2) histogram on a 50 x 50 grid against
// cell integrals of the (marginal) density; cells with expectation < 5 are pooled.
struct ChiSquare {
  double statistic;
  int dof;
};

ChiSquare chi_square_2d(const EventBatch& batch, const std::function<double(double, double)>& density,
                        double half_width) {
  constexpr int kCells = 50;
  const double h = 2 * half_width / kCells;
  std::vector<double> observed(kCells * kCells, 0.0), expected(kCells * kCells, 0.0);
  double outside = 0;
  for (std::size_t i = 0; i < batch.n_events(); ++i) {
    const auto r = batch.row(i);
    const int a = static_cast<int>(std::floor((r[0] + half_width) / h));
    const int b = static_cast<int>(std::floor((r[1] + half_width) / h));
    if (a < 0 || a >= kCells || b < 0 || b >= kCells) {
      ++outside;
      continue;
    }
    observed[a * kCells + b] += 1;
  }
  using GL = boost::math::quadrature::gauss<double, 10>;
  double total_mass = 0;
  for (int a = 0; a < kCells; ++a) {
    for (int b = 0; b < kCells; ++b) {
      const double x0 = -half_width + a * h, y0 = -half_width + b * h;
      expected[a * kCells + b] = GL::integrate(
          [&](double x) { return GL::integrate([&](double y) { return density(x, y); }, y0, y0 + h); },
          x0, x0 + h);
      total_mass += expected[a * kCells + b];
    }
  }
  // Mass outside the grid is estimated from the sample; scale the grid to the inside count.
  const double inside = batch.n_events() - outside;
  ChiSquare out{0.0, -1};
  double pooled_o = 0, pooled_e = 0;
  for (std::size_t c = 0; c < expected.size(); ++c) {
    const double e = expected[c] / total_mass * inside;
    if (e < 5) {
      pooled_o += observed[c];
      pooled_e += e;
      continue;
    }
    out.statistic += (observed[c] - e) * (observed[c] - e) / e;
    ++out.dof;
  }
  if (pooled_e > 0) {
    out.statistic += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
    ++out.dof;
  }
  return out;
}

}  // namespace

TEST_SUITE("rng") {
  TEST_CASE("Philox4x32-10 known answers") {
    // Published test vectors of the reference implementation.
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
          std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdcceb, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("event streams are reproducible and distinct") {
    EventStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    const double ua = a.uniform();
    CHECK(ua == b.uniform());
    CHECK(ua != c.uniform());
    CHECK(ua != d.uniform());
  }

  TEST_CASE("uniforms lie in the open unit interval with the right moments") {
    double sum = 0, sum2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      EventStream s(1, i);
      const double u = s.uniform();
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
      sum += u;
      sum2 += u * u;
    }
    CHECK(std::abs(sum / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
    CHECK(std::abs(sum2 / n - sum * sum / n / n - 1.0 / 12) < 2e-3);
  }

  TEST_CASE("normals pass a KS test") {
    std::vector<double> z;
    for (int i = 0; i < 100000; ++i) {
      EventStream s(9, i);
      z.push_back(s.normal());
      z.push_back(s.normal());
    }
    const boost::math::normal_distribution<> nd;
    const double d = oracle::ks_statistic(z, [&](double x) { return boost::math::cdf(nd, x); });
    CHECK(d < 1.63 / std::sqrt(double(z.size())));  // 1% level
  }
}

TEST_SUITE("inverse_cdf") {
  TEST_CASE("standard normal quantiles") {
    auto gauss = [](double x) { return std::exp(-0.5 * x * x); };
    const TabulatedInverseCdf t(gauss, 8.0);
    CHECK(std::abs(t.quantile(0.5)) < 1e-6);
    const boost::math::normal_distribution<> nd;
    CHECK(std::abs(t.quantile(boost::math::cdf(nd, 1.0)) - 1.0) < 1e-3);
    for (double p : {1e-6, 0.01, 0.2, 0.7, 0.99}) {
      CHECK(std::abs(t.quantile(p) - boost::math::quantile(nd, p)) < 1e-5);
    }
  }

  TEST_CASE("inversion is exact at the grid nodes") {
    auto f = [](double x) { return std::exp(-x * x / 8) * std::pow(std::cos(2 * kPi * std::sqrt(2.0) * x), 2); };
    const TabulatedInverseCdf t(f, 14.0, 4097);
    const auto grid = t.grid();
    const auto cdf = t.cdf_values();
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      if (cdf[i] <= cdf[i - 1] || cdf[i + 1] <= cdf[i]) continue;
      REQUIRE(t.quantile(cdf[i]) == grid[i]);
      REQUIRE(t.cdf(grid[i]) == cdf[i]);
    }
    for (std::size_t i = 1; i < cdf.size(); ++i) REQUIRE(cdf[i] >= cdf[i - 1]);
    CHECK(cdf.front() == 0.0);
    CHECK(cdf.back() == 1.0);
  }

  TEST_CASE("construction errors") {
    CHECK_THROWS_AS(TabulatedInverseCdf([](double) { return 0.0; }, 1.0), NumericalError);
    CHECK_THROWS_AS(TabulatedInverseCdf([](double) { return NAN; }, 1.0), NumericalError);
    CHECK_THROWS_AS(TabulatedInverseCdf([](double x) { return std::exp(-x * x); }, 1.0), NumericalError);
    CHECK_THROWS_AS(TabulatedInverseCdf([](double x) { return std::exp(-x * x); }, -1.0), ConfigError);
  }

  TEST_CASE("NOON N=2 centroid-direction draws pass KS against quadrature") {
    const Sampler sampler(NoonState(2));
    const auto* table = sampler.centroid_cdf();
    REQUIRE(table != nullptr);
    const double L = table->half_width();
    auto f = [](double y) {
      const double c = std::cos(2 * kPi * std::sqrt(2.0) * y);
      return std::exp(-y * y / 8) * c * c;
    };
    const oracle::QuadratureCdf reference(f, -L, L, 8000);
    std::vector<double> draws(1'000'000);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      EventStream s(2024, i);
      draws[i] = table->quantile(s.uniform());
    }
    const double d = oracle::ks_statistic(draws, reference);
    MESSAGE("KS statistic D = " << d);
    CHECK(d < 0.002);
  }
}

TEST_SUITE("sampler") {
  TEST_CASE("transform matrices are orthogonal with the centroid row first") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int n = 2; n <= 4; ++n) {
      const auto m = transform_matrix(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          double dot = 0;
          for (int k = 0; k < n; ++k) dot += m.at(i, k) * m.at(j, k);
          CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
        }
        CHECK(m.at(0, i) == doctest::Approx(1 / std::sqrt(double(n))).epsilon(1e-15));
      }
      std::array<double, 4> c{0.3, 0.3, 0.3, 0.3}, y{}, back{};
      m.apply(std::span<const double>(c.data(), n), std::span<double>(y.data(), n));
      CHECK(y[0] == doctest::Approx(std::sqrt(double(n)) * 0.3).epsilon(1e-14));
      for (int i = 1; i < n; ++i) CHECK(std::abs(y[i]) < 1e-15);
      for (int trial = 0; trial < 20; ++trial) {
        std::array<double, 4> v{g(rng), g(rng), g(rng), g(rng)};
        m.apply(std::span<const double>(v.data(), n), std::span<double>(y.data(), n));
        m.apply_transpose(std::span<const double>(y.data(), n), std::span<double>(back.data(), n));
        for (int i = 0; i < n; ++i) CHECK(std::abs(back[i] - v[i]) < 1e-12);
      }
    }
    const auto m2 = transform_matrix(2);
    CHECK(m2.at(1, 0) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(m2.at(1, 1) == doctest::Approx(-1 / std::sqrt(2.0)));
    CHECK_THROWS_AS(transform_matrix(5), ConfigError);
    CHECK_THROWS_AS(transform_matrix(1), ConfigError);
  }

  TEST_CASE("NOON N=2 Gaussian coordinate has variance sigma^2 / (8 pi^2)") {
    const NoonState s(2);
    const auto batch = sample_events(s, 1'000'000, 5);
    const auto m = transform_matrix(2);
    double sum2 = 0, sum = 0;
    for (std::size_t i = 0; i < batch.n_events(); ++i) {
      std::array<double, 2> y{};
      m.apply(batch.row(i), y);
      sum += y[1];
      sum2 += y[1] * y[1];
    }
    const double n = batch.n_events();
    const double var = sum2 / n - (sum / n) * (sum / n);
    const double expected = s.sigma() * s.sigma() / (8 * kPi * kPi);
    CHECK(expected == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::abs(var / expected - 1) < 0.01);
  }

  TEST_CASE("JG N=2 centroid rms equals 1/(2NB)") {
    const auto batch = sample_events(JointGaussianState(2, 1.0, 1.0), 1'000'000, 6);
    double sum2 = 0;
    for (std::size_t i = 0; i < batch.n_events(); ++i) {
      const double x = 0.5 * (batch.row(i)[0] + batch.row(i)[1]);
      sum2 += x * x;
    }
    CHECK(std::abs(std::sqrt(sum2 / batch.n_events()) / 0.25 - 1) < 0.01);
  }

  TEST_CASE("raw coordinates have zero mean") {
    const std::vector<StateModel> states = {NoonState(3), JointGaussianState(4, 0.6, 0.9), CatState(1.5, 0.7)};
    for (const auto& s : states) {
      const auto batch = sample_events(s, 1'000'000, 8);
      for (int c = 0; c < s.n_photons(); ++c) {
        const double se = std::sqrt(var_of(batch, c) / batch.n_events());
        CHECK(std::abs(mean_of(batch, c)) < 5 * se);
      }
    }
  }

  TEST_CASE("two-photon histograms match the density by chi-square") {
    struct Case {
      StateModel state;
      double half_width;
    };
    const std::vector<Case> cases = {{NoonState(2), 6.0},
                                     {JointGaussianState(2, 1.0, 1.0), 1.2},
                                     {CatState(1.0, kPi / 2), 0.35},
                                     {CatState(1.5, 0.4), 0.5}};
    for (const auto& c : cases) {
      CAPTURE(c.state.to_json().dump());
      const auto batch = sample_events(c.state, 1'000'000, 21);
      const auto chi = chi_square_2d(
          batch,
          [&](double x1, double x2) {
            const std::array<double, 2> xs{x1, x2};
            return c.state.density(xs);
          },
          c.half_width);
      const boost::math::chi_squared_distribution<> dist(chi.dof);
      const double critical = boost::math::quantile(boost::math::complement(dist, 0.001));
      MESSAGE("chi2 = " << chi.statistic << " dof = " << chi.dof << " critical = " << critical);
      CHECK(chi.statistic < critical);
    }
  }

  TEST_CASE("sampled NOON centroids reproduce the fringe zeros") {
    // Bins of width lambda/200 centred on analytic zeros of cos^2(4 pi X) hold
    // the small bin-integrated mass predicted by the density, not a fringe peak.
    const auto batch = sample_events(NoonState(2), 1'000'000, 4);
    const double w = 0.005;
    double at_zero = 0, at_peak = 0;
    for (std::size_t i = 0; i < batch.n_events(); ++i) {
      const double x = 0.5 * (batch.row(i)[0] + batch.row(i)[1]);
      const double z = std::fmod(std::abs(x) - 0.125, 0.25);
      const double p = std::fmod(std::abs(x), 0.25);
      if (std::abs(z) < w / 2 || std::abs(z - 0.25) < w / 2) at_zero += 1;
      if (p < w / 2 || p > 0.25 - w / 2) at_peak += 1;
    }
    // cos^2 integrated over +-w/2 around a zero relative to around a peak.
    const double a = 2 * kPi * w;
    const double ratio = (1 - std::sin(a) / a) / (1 + std::sin(a) / a);
    CHECK(at_zero / at_peak == doctest::Approx(ratio).epsilon(0.5));
    CHECK(at_zero / at_peak < 0.01);
  }

  TEST_CASE("sampling is deterministic and independent of worker count") {
    const Sampler sampler(NoonState(3));
    const auto a = sampler.sample(20000, 77, 1);
    const auto b = sampler.sample(20000, 77, 3);
    const auto pa = temp_path("det_a.csv"), pb = temp_path("det_b.csv");
    write_event_csv(pa, a);
    write_event_csv(pb, b);
    CHECK(slurp(pa) == slurp(pb));
    const auto c = sampler.sample(20000, 78, 1);
    CHECK(c.positions()[0] != a.positions()[0]);
    std::filesystem::remove(pa);
    std::filesystem::remove(pb);
  }

  TEST_CASE("event CSV round trip and verification") {
    const auto batch = sample_events(CatState(2.0, 1.0), 500, 3);
    const auto path = temp_path("roundtrip.csv");
    write_event_csv(path, batch);
    const auto back = read_event_csv(path, true);
    REQUIRE(back.n_events() == 500);
    for (std::size_t i = 0; i < batch.positions().size(); ++i) {
      REQUIRE(back.positions()[i] == batch.positions()[i]);
    }
    CHECK(back.seed() == 3);
    // Tamper with one value: verification must notice.
    std::string text = slurp(path);
    text = text.substr(0, text.rfind('\n', text.size() - 2) + 1) + "0.5,0.5\n";
    {
      std::ofstream out(path, std::ios::binary);
      out << text;
    }
    CHECK_THROWS_AS(read_event_csv(path, true), NumericalError);
    std::filesystem::remove(path);
  }

  TEST_CASE("split_batch partitions contiguously") {
    const auto batch = sample_events(NoonState(2), 10, 1);
    const auto s = split_batch(batch, 3);
    REQUIRE(s.parts.size() == 3);
    CHECK(s.dropped == 1);
    for (std::size_t p = 0; p < 3; ++p) {
      CHECK(s.parts[p].n_events() == 3);
      CHECK(s.parts[p].first_event() == 3 * p);
      for (std::size_t i = 0; i < 3; ++i) CHECK(s.parts[p].row(i)[0] == batch.row(3 * p + i)[0]);
    }
    const auto one = split_batch(batch, 1);
    CHECK(one.parts[0].n_events() == 10);
    CHECK(one.dropped == 0);
    CHECK_THROWS_AS(split_batch(batch, 11), ConfigError);
    const auto big = sample_events(NoonState(2), 1'000'000, 1);
    const auto halves = split_batch(big, 2);
    CHECK(halves.parts[0].n_events() == 500'000);
    CHECK(halves.parts[1].n_events() == 500'000);
  }

  TEST_CASE("sampled parts equal the corresponding rows of the full run") {
    const Sampler sampler(JointGaussianState(3, 0.7, 1.0));
    const auto full = sampler.sample(100, 9);
    const auto tail = sampler.sample(40, 9, 1, 60);
    for (std::size_t i = 0; i < 40; ++i) CHECK(tail.row(i)[2] == full.row(60 + i)[2]);
  }
}
