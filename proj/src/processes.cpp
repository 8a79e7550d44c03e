#include "geostore/processes.hpp"

#include "geostore/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace geostore::processes {

double seasonality_eval(const Seasonality& s, double t_h) {
  double mu = s.mu0;
  for (const auto& c : s.components) {
    if (!(c.period_h > 0.0)) throw DomainError("seasonality: period must be positive");
    mu += c.amplitude * std::cos(2.0 * std::numbers::pi * (t_h - c.shift_h) / c.period_h);
  }
  return mu;
}

double OUParams::sigma_at(int n) const {
  if (sigma.empty()) return 0.0;
  if (n < 0) n = 0;
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(n), sigma.size() - 1);
  return sigma[idx];
}

double ou_step_sd(const OUParams& params, int n, double dt) {
  if (!(params.beta > 0.0)) throw DomainError("OU: beta must be positive");
  if (!(dt > 0.0)) throw DomainError("OU: dt must be positive");
  const double s = params.sigma_at(n);
  return std::sqrt(s * s / (2.0 * params.beta) * -std::expm1(-2.0 * params.beta * dt));
}

double ou_exact_step(double x, const OUParams& params, int n, double dt, double b) {
  return x * std::exp(-params.beta * dt) + ou_step_sd(params, n, dt) * b;
}

std::pair<double, double> stationary_band(const OUParams& params) {
  if (!(params.beta > 0.0)) throw DomainError("OU: beta must be positive");
  for (double s : params.sigma) {
    if (s != params.sigma.front()) throw DomainError("stationary_band: volatility is not constant");
  }
  const double s = params.sigma.empty() ? 0.0 : params.sigma.front();
  const double half = 3.0 * s / std::sqrt(2.0 * params.beta);
  return {-half, half};
}

std::vector<PathPoint> sample_path(const OUParams& params, const Seasonality& seasonality,
                                   int n_steps, double dt, std::uint64_t seed) {
  if (n_steps < 1) throw DomainError("sample_path: n_steps must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<PathPoint> path;
  path.reserve(static_cast<std::size_t>(n_steps) + 1);
  double x = params.x0;
  path.push_back({0.0, x, x + seasonality_eval(seasonality, 0.0)});
  for (int n = 0; n < n_steps; ++n) {
    x = ou_exact_step(x, params, n, dt, normal(rng));
    const double t = (n + 1) * dt;
    path.push_back({t, x, x + seasonality_eval(seasonality, t)});
  }
  return path;
}

}  // namespace geostore::processes
