#include "geostore/errors.hpp"
#include "geostore/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace geostore::numerics {

namespace {

constexpr double kTruncation = 8.0;    // quadrature range in standard deviations
constexpr double kMaxPiece = 2.0;      // longest quadrature piece in z units
constexpr double kSaturation = 9.0;    // |u| beyond which Φ(u) is taken as 0/1

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double edge_cdf(double edge, double mean, double sd) {
  if (edge == -kInf) return 0.0;
  if (edge == kInf) return 1.0;
  const double u = (edge - mean) / sd;
  if (u < -kSaturation) return 0.0;
  if (u > kSaturation) return 1.0;
  return std_normal_cdf(u);
}

// One-dimensional law of P over the p-cells, scaled by `mass`.
void accumulate_1d(double mean, double sd, std::span<const double> p_edges, double mass,
                   double* out) {
  const std::size_t cells = p_edges.size() - 1;
  if (sd == 0.0) {
    for (std::size_t j = 0; j < cells; ++j) {
      if (p_edges[j] < mean && mean <= p_edges[j + 1]) out[j] += mass;
    }
    return;
  }
  double prev = edge_cdf(p_edges[0], mean, sd);
  for (std::size_t j = 0; j < cells; ++j) {
    const double next = edge_cdf(p_edges[j + 1], mean, sd);
    out[j] += mass * (next - prev);
    prev = next;
  }
}

// P is an affine function of the R-noise z (zero conditional spread).
void accumulate_degenerate(const BivariateNormal& law, double z_lo, double z_hi,
                           std::span<const double> p_edges, double* out) {
  const double slope = law.sd_p * law.corr;
  const std::size_t cells = p_edges.size() - 1;
  if (slope == 0.0) {
    accumulate_1d(law.mean_p, 0.0, p_edges,
                  std_normal_cdf(z_hi) - std_normal_cdf(z_lo), out);
    return;
  }
  for (std::size_t j = 0; j < cells; ++j) {
    double a = (p_edges[j] - law.mean_p) / slope;
    double b = (p_edges[j + 1] - law.mean_p) / slope;
    if (slope < 0.0) std::swap(a, b);
    const double lo = std::max(a, z_lo);
    const double hi = std::min(b, z_hi);
    if (hi > lo) out[j] += std_normal_cdf(hi) - std_normal_cdf(lo);
  }
}

void accumulate_slice(const BivariateNormal& law, double z_lo, double z_hi,
                      std::span<const double> p_edges, double* out) {
  const double cond = law.sd_p * std::sqrt(std::max(0.0, 1.0 - law.corr * law.corr));
  if (cond == 0.0) {
    accumulate_degenerate(law, z_lo, z_hi, p_edges, out);
    return;
  }
  const double lo = std::max(z_lo, -kTruncation);
  const double hi = std::min(z_hi, kTruncation);
  if (!(hi > lo)) return;

  const double slope = law.sd_p * law.corr;
  std::vector<double> cuts{lo, hi};
  if (slope != 0.0) {
    for (double e : p_edges) {
      if (!std::isfinite(e)) continue;
      const double z = (e - law.mean_p) / slope;
      if (z > lo && z < hi) cuts.push_back(z);
    }
  }
  std::sort(cuts.begin(), cuts.end());

  const auto& rule = gauss_legendre_64();
  const std::size_t cells = p_edges.size() - 1;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double span_len = cuts[c + 1] - cuts[c];
    if (!(span_len > 0.0)) continue;
    const int pieces = std::max(1, static_cast<int>(std::ceil(span_len / kMaxPiece)));
    const double piece = span_len / pieces;
    for (int k = 0; k < pieces; ++k) {
      const double a = cuts[c] + k * piece;
      const double half = 0.5 * piece;
      const double mid = a + half;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double z = mid + half * rule.nodes[q];
        const double wz = half * rule.weights[q] * inv_sqrt_2pi * std::exp(-0.5 * z * z);
        const double cmean = law.mean_p + slope * z;
        double prev = edge_cdf(p_edges[0], cmean, cond);
        for (std::size_t j = 0; j < cells; ++j) {
          const double next = edge_cdf(p_edges[j + 1], cmean, cond);
          out[j] += wz * (next - prev);
          prev = next;
        }
      }
    }
  }
}

void check_edges(std::span<const double> edges, const char* what) {
  if (edges.size() < 2) throw DomainError(std::string("gaussian probabilities: too few ") + what + " edges");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (std::isnan(edges[i]) || std::isnan(edges[i + 1]) || edges[i] > edges[i + 1]) {
      throw DomainError(std::string("gaussian probabilities: inverted ") + what + " bounds");
    }
  }
}

}  // namespace

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

GaussLegendreRule make_gauss_legendre(int n) {
  if (n < 1) throw DomainError("make_gauss_legendre: n must be positive");
  GaussLegendreRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

const GaussLegendreRule& gauss_legendre_64() {
  static const GaussLegendreRule rule = make_gauss_legendre(64);
  return rule;
}

void gaussian_grid_probs(const BivariateNormal& law, std::span<const double> r_edges,
                         std::span<const double> p_edges, std::span<double> out) {
  check_edges(r_edges, "r");
  check_edges(p_edges, "p");
  if (!(law.sd_r >= 0.0) || !(law.sd_p >= 0.0) || !(std::abs(law.corr) <= 1.0)) {
    throw DomainError("gaussian probabilities: invalid law parameters");
  }
  const std::size_t nr = r_edges.size() - 1;
  const std::size_t np = p_edges.size() - 1;
  if (out.size() != nr * np) throw DimensionError("gaussian_grid_probs: output size mismatch");
  std::fill(out.begin(), out.end(), 0.0);

  if (law.sd_r == 0.0) {
    for (std::size_t i = 0; i < nr; ++i) {
      if (r_edges[i] < law.mean_r && law.mean_r <= r_edges[i + 1]) {
        accumulate_1d(law.mean_p, law.sd_p, p_edges, 1.0, out.data() + i * np);
      }
    }
  } else {
    for (std::size_t i = 0; i < nr; ++i) {
      const double z_lo = (r_edges[i] - law.mean_r) / law.sd_r;
      const double z_hi = (r_edges[i + 1] - law.mean_r) / law.sd_r;
      accumulate_slice(law, z_lo, z_hi, p_edges, out.data() + i * np);
    }
  }
  for (double& v : out) v = clamp01(v);
}

double gaussian_rect_prob(const BivariateNormal& law, const Rectangle& rect) {
  const std::array<double, 2> r_edges{rect.r_lo, rect.r_hi};
  const std::array<double, 2> p_edges{rect.p_lo, rect.p_hi};
  double out = 0.0;
  gaussian_grid_probs(law, r_edges, p_edges, std::span<double>(&out, 1));
  return out;
}

double phi_delta(double delta, double dt) {
  if (!(delta >= 0.0) || !(dt > 0.0)) throw DomainError("phi_delta: need delta >= 0 and dt > 0");
  const double x = delta * dt;
  if (x < 1e-6) return dt * (1.0 - 0.5 * x + x * x / 6.0);
  return -std::expm1(-x) / delta;
}

}  // namespace geostore::numerics
