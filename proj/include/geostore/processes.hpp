#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace geostore::processes {

struct SeasonalComponent {
  double amplitude = 0.0;
  double period_h = 1.0;
  double shift_h = 0.0;
};

/// mu(t) = mu0 + sum_i amplitude_i cos(2 pi (t - shift_i) / period_i), t in hours.
struct Seasonality {
  double mu0 = 0.0;
  std::vector<SeasonalComponent> components;
};

double seasonality_eval(const Seasonality& s, double t_h);

/// Ornstein–Uhlenbeck deviation dX = -beta X dt + sigma_n dW.
/// `sigma` holds one value per period; periods past the end reuse the last.
struct OUParams {
  double beta = 1.0;
  std::vector<double> sigma{0.0};
  double x0 = 0.0;

  double sigma_at(int n) const;
};

/// Standard deviation of the exact one-step noise, Sigma(n).
double ou_step_sd(const OUParams& params, int n, double dt);

double ou_exact_step(double x, const OUParams& params, int n, double dt, double b);

/// (-3 s, +3 s) with s the stationary standard deviation.
std::pair<double, double> stationary_band(const OUParams& params);

struct PathPoint {
  double t_h = 0.0;
  double deseasonalized = 0.0;
  double value = 0.0;
};

/// n_steps + 1 points starting at t = 0 with X(0) = x0.
std::vector<PathPoint> sample_path(const OUParams& params, const Seasonality& seasonality,
                                   int n_steps, double dt, std::uint64_t seed);

}  // namespace geostore::processes
