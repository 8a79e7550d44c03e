#include "doctest.h"

#include "geostore/processes.hpp"

#include <cmath>
#include <random>

using namespace geostore::processes;

TEST_SUITE("processes") {
  TEST_CASE("seasonality") {
    Seasonality flat{-4.64e3, {}};
    for (double t : {0.0, 10.0, 1e4}) CHECK(seasonality_eval(flat, t) == -4.64e3);
    Seasonality yearly{5.0, {{20.0, 365.0 * 24.0, 0.0}}};
    CHECK(seasonality_eval(yearly, 0.0) == doctest::Approx(25.0));
    Seasonality shifted{0.0, {{3.0, 48.0, 7.0}}};
    CHECK(seasonality_eval(shifted, 7.0 + 24.0) == doctest::Approx(-3.0));
  }

  TEST_CASE("exact OU step") {
    OUParams p{0.5, {2.0}, 0.0};
    CHECK(ou_exact_step(2.0, p, 0, 1.0, 0.0) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-14));
    const double var = ou_step_sd(p, 0, 1.0) * ou_step_sd(p, 0, 1.0);
    CHECK(var == doctest::Approx(4.0 * (1.0 - std::exp(-1.0))).epsilon(1e-13));
    // Midpoint quadrature of int_0^dt sigma^2 e^{-2 beta (dt - s)} ds.
    const int m = 200000;
    double q = 0.0;
    for (int i = 0; i < m; ++i) {
      const double s = (i + 0.5) / m;
      q += 4.0 * std::exp(-2 * 0.5 * (1.0 - s)) / m;
    }
    CHECK(std::abs(var - q) <= 1e-10);
    OUParams quiet{0.5, {0.0}, 0.0};
    CHECK(ou_step_sd(quiet, 0, 1.0) == 0.0);
    CHECK(ou_exact_step(1.0, quiet, 0, 1.0, 3.0) == doctest::Approx(std::exp(-0.5)));
  }

  TEST_CASE("step variance bounded by and increasing to the stationary variance") {
    OUParams p{0.7, {1.3}, 0.0};
    const double stat = 1.3 * 1.3 / (2 * 0.7);
    double prev = 0.0;
    for (double dt = 0.01; dt < 50; dt *= 1.5) {
      const double v = std::pow(ou_step_sd(p, 0, dt), 2);
      // Strictly increasing until it saturates in double precision.
      CHECK(v >= prev);
      if (v < stat * (1 - 1e-12)) CHECK(v > prev);
      CHECK(v <= stat * (1 + 1e-15));
      prev = v;
    }
  }

  TEST_CASE("per-period volatility") {
    OUParams p{0.5, {1.0, 2.0}, 0.0};
    CHECK(p.sigma_at(0) == 1.0);
    CHECK(p.sigma_at(1) == 2.0);
    CHECK(p.sigma_at(5) == 2.0);
  }

  TEST_CASE("step is linear in (x, b)") {
    OUParams p{0.5, {2.0}, 0.0};
    const double a = ou_exact_step(1.5, p, 0, 1.0, 0.3), b = ou_exact_step(-0.7, p, 0, 1.0, 1.1);
    CHECK(ou_exact_step(0.8, p, 0, 1.0, 1.4) == doctest::Approx(a + b).epsilon(1e-14));
  }

  TEST_CASE("stationary band") {
    OUParams quiet{0.5, {0.0}, 0.0};
    CHECK(stationary_band(quiet).first == 0.0);
    CHECK(stationary_band(quiet).second == 0.0);
    OUParams unit{0.5, {1.0}, 0.0};
    CHECK(stationary_band(unit).first == doctest::Approx(-3.0));
    CHECK(stationary_band(unit).second == doctest::Approx(3.0));
  }

  TEST_CASE("sample paths are reproducible and decay without noise") {
    OUParams p{0.5, {0.0}, 4.0};
    Seasonality s{1.0, {}};
    const auto path = sample_path(p, s, 10, 1.0, 3);
    REQUIRE(path.size() == 11);
    for (std::size_t n = 0; n < path.size(); ++n) {
      CHECK(path[n].deseasonalized == doctest::Approx(4.0 * std::exp(-0.5 * n)).epsilon(1e-12));
      CHECK(path[n].value == doctest::Approx(1.0 + path[n].deseasonalized));
    }
    OUParams noisy{0.5, {2.0}, 0.0};
    const auto a = sample_path(noisy, s, 50, 1.0, 9), b = sample_path(noisy, s, 50, 1.0, 9);
    for (std::size_t n = 0; n < a.size(); ++n) CHECK(a[n].value == b[n].value);
  }

  TEST_CASE("Monte Carlo moments of one step") {
    OUParams p{0.5, {2.0}, 1.5};
    Seasonality s{0.0, {}};
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_path(p, s, 1, 1.0, 1000 + i)[1].deseasonalized;
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    const double expect_var = 4.0 * (1.0 - std::exp(-1.0));
    CHECK(std::abs(mean - 1.5 * std::exp(-0.5)) <= 3 * std::sqrt(expect_var / n));
    CHECK(std::abs(var - expect_var) <= 3 * expect_var * std::sqrt(2.0 / n));
  }

  TEST_CASE("lag-1 autocorrelation of a long path") {
    OUParams p{0.5, {1.0}, 0.0};
    const auto path = sample_path(p, Seasonality{}, 200000, 1.0, 77);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t n = 1; n < path.size(); ++n) {
      sxy += path[n].deseasonalized * path[n - 1].deseasonalized;
      sxx += path[n - 1].deseasonalized * path[n - 1].deseasonalized;
    }
    const double phi = sxy / sxx;
    const double se = std::sqrt((1 - std::exp(-1.0)) / static_cast<double>(path.size()));
    CHECK(std::abs(phi - std::exp(-0.5)) <= 3 * se);
  }
}
