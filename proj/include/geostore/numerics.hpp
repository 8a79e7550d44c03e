#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace geostore {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace geostore

namespace geostore::numerics {

/// exp(A t) by scaling and squaring with the degree-13 Padé approximant.
Matrix matrix_exponential(const Matrix& a, double t = 1.0);

/// Real Schur form A = U T U^T with T upper quasi-triangular.
struct SchurForm {
  Matrix u;
  Matrix t;
};

SchurForm real_schur(const Matrix& a);

/// Largest real part of the eigenvalues read off a Schur form.
double spectral_abscissa(const SchurForm& schur);

/// Solves A P + P A^T + Q = 0 (Bartels–Stewart on the real Schur form).
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

/// Same equation on a precomputed Schur form of A; with `transposed` the
/// equation solved is A^T P + P A + Q = 0.
Matrix solve_lyapunov(const SchurForm& schur, const Matrix& q, bool transposed);

/// Direct Kronecker-product solve, for small fixtures only (n <= 50).
Matrix solve_lyapunov_kronecker(const Matrix& a, const Matrix& q);

/// Factor L with X ≈ L L^T for a symmetric positive semidefinite X, keeping
/// only pivots above rel_tol times the largest one.
Matrix psd_factor(const Matrix& x, double rel_tol = 1e-14);

struct AdiOptions {
  double tolerance = 1e-10;  // on ||W^T W||_2 / ||B^T B||_2
  int max_iterations = 600;
  int shifts_per_cycle = 24;
};

struct AdiResult {
  Matrix z;  // P ≈ Z Z^T
  double relative_residual = 0.0;
  int iterations = 0;
};

/// Low-rank factor of the solution of A P + P A^T + B B^T = 0 (or the
/// transposed equation) for sparse stable A, by real-shift LR-ADI.
AdiResult lowrank_lyapunov_adi(const SparseMatrix& a, const Matrix& b, bool transposed,
                               const AdiOptions& options = {});

double std_normal_cdf(double z);
double std_normal_pdf(double z);

struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussLegendreRule make_gauss_legendre(int n);

/// Cached 64-node rule.
const GaussLegendreRule& gauss_legendre_64();

struct BivariateNormal {
  double mean_r = 0.0;
  double mean_p = 0.0;
  double sd_r = 1.0;
  double sd_p = 1.0;
  double corr = 0.0;
};

/// Half-open axis-aligned rectangle (r_lo, r_hi] x (p_lo, p_hi]; infinite
/// bounds allowed.
struct Rectangle {
  double r_lo = -kInf;
  double r_hi = kInf;
  double p_lo = -kInf;
  double p_hi = kInf;
};

double gaussian_rect_prob(const BivariateNormal& law, const Rectangle& rect);

/// Probabilities of all cells of a tensor partition in one pass. The edges
/// are sorted cell boundaries (first/last may be infinite); `out` receives
/// (r_edges.size()-1) x (p_edges.size()-1) values, row-major in r.
void gaussian_grid_probs(const BivariateNormal& law, std::span<const double> r_edges,
                         std::span<const double> p_edges, std::span<double> out);

/// (1 - exp(-delta dt)) / delta with its dt limit at delta = 0.
double phi_delta(double delta, double dt);

/// Runs fn(i) for i in [0, count) on up to `threads` worker threads.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace geostore::numerics
