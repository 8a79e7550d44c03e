#include "geostore/errors.hpp"
#include "geostore/numerics.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

namespace geostore::numerics {

namespace {

struct Block {
  Eigen::Index start;
  Eigen::Index size;
};

std::vector<Block> diagonal_blocks(const Matrix& t) {
  std::vector<Block> blocks;
  const Eigen::Index n = t.rows();
  Eigen::Index k = 0;
  while (k < n) {
    if (k + 1 < n && t(k + 1, k) != 0.0) {
      blocks.push_back({k, 2});
      k += 2;
    } else {
      blocks.push_back({k, 1});
      k += 1;
    }
  }
  return blocks;
}

// Solves T Y + Y T^T = C for upper quasi-triangular T.
Matrix solve_quasi_triangular(const Matrix& t, const Matrix& c) {
  const Eigen::Index n = t.rows();
  const auto blocks = diagonal_blocks(t);
  Matrix y = Matrix::Zero(n, n);
  Matrix z(n, 2);

  for (auto jb = blocks.rbegin(); jb != blocks.rend(); ++jb) {
    const Eigen::Index j0 = jb->start;
    const Eigen::Index q = jb->size;
    const Eigen::Index tail = j0 + q;
    Matrix rhs = c.middleCols(j0, q);
    if (tail < n) {
      rhs.noalias() -= y.rightCols(n - tail) * t.block(j0, tail, q, n - tail).transpose();
    }
    const Matrix s = t.block(j0, j0, q, q);

    for (auto ib = blocks.rbegin(); ib != blocks.rend(); ++ib) {
      const Eigen::Index i0 = ib->start;
      const Eigen::Index p = ib->size;
      const Eigen::Index itail = i0 + p;
      Matrix r = rhs.middleRows(i0, p);
      if (itail < n) {
        r.noalias() -= t.block(i0, itail, p, n - itail) * z.block(itail, 0, n - itail, q);
      }
      // (I_q ⊗ T_ii + S ⊗ I_p) vec(Z_i) = vec(r)
      const Matrix tii = t.block(i0, i0, p, p);
      Matrix k = Matrix::Zero(p * q, p * q);
      for (Eigen::Index a = 0; a < q; ++a) {
        k.block(a * p, a * p, p, p) += tii;
        for (Eigen::Index b = 0; b < q; ++b) {
          k.block(a * p, b * p, p, p) += s(a, b) * Matrix::Identity(p, p);
        }
      }
      Eigen::FullPivLU<Matrix> lu(k);
      if (!lu.isInvertible()) {
        throw StabilityError("solve_lyapunov: eigenvalues sum to zero (A not stable)");
      }
      const Vector sol = lu.solve(Eigen::Map<const Vector>(r.data(), p * q));
      for (Eigen::Index a = 0; a < q; ++a) {
        z.block(i0, a, p, 1) = sol.segment(a * p, p);
      }
    }
    y.middleCols(j0, q) = z.leftCols(q);
  }
  return y;
}

void check_square_pair(const Matrix& a, const Matrix& q) {
  if (a.rows() != a.cols() || q.rows() != q.cols() || q.rows() != a.rows()) {
    throw DimensionError("solve_lyapunov: dimension mismatch");
  }
  if (!a.allFinite() || !q.allFinite()) {
    throw DomainError("solve_lyapunov: non-finite input");
  }
}

}  // namespace

SchurForm real_schur(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("real_schur: matrix is not square");
  Eigen::RealSchur<Matrix> schur(a);
  if (schur.info() != Eigen::Success) {
    throw StabilityError("real_schur: QR iteration did not converge");
  }
  return {schur.matrixU(), schur.matrixT()};
}

double spectral_abscissa(const SchurForm& schur) {
  double best = -kInf;
  for (const auto& b : diagonal_blocks(schur.t)) {
    if (b.size == 1) {
      best = std::max(best, schur.t(b.start, b.start));
    } else {
      best = std::max(best, 0.5 * (schur.t(b.start, b.start) + schur.t(b.start + 1, b.start + 1)));
    }
  }
  return best;
}

Matrix solve_lyapunov(const SchurForm& schur, const Matrix& q, bool transposed) {
  const Eigen::Index n = schur.t.rows();
  if (q.rows() != n || q.cols() != n) throw DimensionError("solve_lyapunov: dimension mismatch");
  if (spectral_abscissa(schur) >= 0.0) {
    throw StabilityError("solve_lyapunov: matrix has an eigenvalue with nonnegative real part");
  }
  const Matrix& u = schur.u;
  Matrix f = u.transpose() * q * u;
  Matrix x;
  if (!transposed) {
    // T Y + Y T^T = -F, P = U Y U^T
    x = solve_quasi_triangular(schur.t, -f);
  } else {
    // T^T Y + Y T = -F; flipping indices turns T^T into an upper
    // quasi-triangular matrix with the same block structure reversed.
    const Matrix tf = schur.t.transpose().reverse();
    const Matrix ff = f.reverse();
    x = solve_quasi_triangular(tf, -ff).reverse();
  }
  Matrix p = u * x * u.transpose();
  p = 0.5 * (p + p.transpose());
  return p;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  check_square_pair(a, q);
  if (a.rows() == 0) return Matrix(0, 0);
  const SchurForm schur = real_schur(a);
  Matrix p = solve_lyapunov(schur, q, false);
  const double qn = q.norm();
  const double res = (a * p + p * a.transpose() + q).norm();
  if (!(res <= 1e-8 * std::max(qn, 1e-300))) {
    throw StabilityError("solve_lyapunov: residual check failed");
  }
  return p;
}

Matrix solve_lyapunov_kronecker(const Matrix& a, const Matrix& q) {
  check_square_pair(a, q);
  const Eigen::Index n = a.rows();
  if (n > 50) throw DimensionError("solve_lyapunov_kronecker: only for n <= 50");
  const Matrix ident = Matrix::Identity(n, n);
  Matrix k = Matrix::Zero(n * n, n * n);
  // vec(A P) = (I ⊗ A) vec P, vec(P A^T) = (A ⊗ I) vec P
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) += ident(i, j) * a + a(i, j) * ident;
    }
  }
  Eigen::FullPivLU<Matrix> lu(k);
  if (!lu.isInvertible()) throw StabilityError("solve_lyapunov_kronecker: singular operator");
  const Vector sol = lu.solve(-Eigen::Map<const Vector>(q.data(), n * n));
  Matrix p = Eigen::Map<const Matrix>(sol.data(), n, n);
  return 0.5 * (p + p.transpose());
}

Matrix psd_factor(const Matrix& x, double rel_tol) {
  if (x.rows() != x.cols()) throw DimensionError("psd_factor: matrix is not square");
  const Eigen::Index n = x.rows();
  if (n == 0) return Matrix(0, 0);
  // Diagonally pivoted Cholesky, stopped once the largest remaining pivot
  // falls below rel_tol times the largest diagonal entry.
  Vector d = x.diagonal();
  const double dmax0 = d.maxCoeff();
  Matrix l(n, 0);
  if (!(dmax0 > 0.0)) return l;
  Matrix work(n, std::min<Eigen::Index>(n, 64));
  Eigen::Index k = 0;
  for (; k < n; ++k) {
    Eigen::Index piv = 0;
    const double dk = d.maxCoeff(&piv);
    if (!(dk > rel_tol * dmax0)) break;
    if (k == work.cols()) work.conservativeResize(n, std::min<Eigen::Index>(n, 2 * work.cols()));
    Vector col = x.col(piv);
    if (k > 0) col.noalias() -= work.leftCols(k) * work.row(piv).head(k).transpose();
    col /= std::sqrt(dk);
    work.col(k) = col;
    d -= col.cwiseAbs2();
    d(piv) = 0.0;
  }
  return work.leftCols(k);
}

namespace {

// Thin column compression Z -> Z' with Z' Z'^T ≈ Z Z^T.
Matrix compress_columns(const Matrix& z, double rel_tol) {
  if (z.cols() == 0) return z;
  Eigen::HouseholderQR<Matrix> qr(z);
  const Eigen::Index k = std::min(z.rows(), z.cols());
  const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > rel_tol * s(0)) ++rank;
  const Matrix q = qr.householderQ() * Matrix::Identity(z.rows(), k);
  return q * (svd.matrixU().leftCols(rank) * s.head(rank).asDiagonal());
}

}  // namespace

AdiResult lowrank_lyapunov_adi(const SparseMatrix& a_in, const Matrix& b, bool transposed,
                               const AdiOptions& options) {
  if (a_in.rows() != a_in.cols() || b.rows() != a_in.rows()) {
    throw DimensionError("lowrank_lyapunov_adi: dimension mismatch");
  }
  SparseMatrix a = transposed ? SparseMatrix(a_in.transpose()) : a_in;
  a.makeCompressed();
  const Eigen::Index n = a.rows();

  // Spectral bounds for the shift cycle: Gershgorin for the largest
  // magnitude, inverse iteration for the smallest.
  double rho_max = 0.0;
  {
    Vector rowsum = Vector::Zero(n);
    for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) rowsum(it.row()) += std::abs(it.value());
    }
    rho_max = rowsum.maxCoeff();
  }
  double rho_min = 0.0;
  {
    Eigen::SparseLU<SparseMatrix> lu(a);
    if (lu.info() != Eigen::Success) throw StabilityError("lowrank_lyapunov_adi: singular matrix");
    Vector v = Vector::Ones(n).normalized();
    double growth = 0.0;
    for (int it = 0; it < 60; ++it) {
      Vector w = lu.solve(v);
      growth = w.norm();
      v = w / growth;
    }
    rho_min = 1.0 / growth;
  }
  const double lo = 0.5 * rho_min;
  const double hi = std::max(rho_max, 2.0 * lo);
  const int k_shifts = std::max(2, options.shifts_per_cycle);
  std::vector<double> shifts(static_cast<std::size_t>(k_shifts));
  for (int k = 0; k < k_shifts; ++k) {
    const double frac = static_cast<double>(k) / (k_shifts - 1);
    shifts[static_cast<std::size_t>(k)] = -std::exp(std::log(lo) + frac * (std::log(hi) - std::log(lo)));
  }
  // Interleave large and small shifts so early iterations cover the range.
  std::vector<double> order;
  for (int lo_i = 0, hi_i = k_shifts - 1; lo_i <= hi_i; ++lo_i, --hi_i) {
    order.push_back(shifts[static_cast<std::size_t>(hi_i)]);
    if (lo_i != hi_i) order.push_back(shifts[static_cast<std::size_t>(lo_i)]);
  }

  std::vector<std::unique_ptr<Eigen::SparseLU<SparseMatrix>>> factors(order.size());
  SparseMatrix ident(n, n);
  ident.setIdentity();

  const double b_norm = (b.transpose() * b).norm();
  Matrix w = b;
  Matrix z(n, 0);
  AdiResult result;
  double res = 1.0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const std::size_t k = static_cast<std::size_t>(it) % order.size();
    const double p = order[k];
    if (!factors[k]) {
      factors[k] = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
      SparseMatrix shifted = a + p * ident;
      factors[k]->compute(shifted);
      if (factors[k]->info() != Eigen::Success) {
        throw StabilityError("lowrank_lyapunov_adi: shifted matrix is singular");
      }
    }
    Matrix v = factors[k]->solve(w);
    w -= 2.0 * p * v;
    Matrix grown(n, z.cols() + v.cols());
    grown << z, std::sqrt(-2.0 * p) * v;
    z.swap(grown);
    res = (w.transpose() * w).norm() / std::max(b_norm, 1e-300);
    if (res <= options.tolerance) {
      ++it;
      break;
    }
    if (z.cols() > 2 * n / 3 + 8 || (it + 1) % static_cast<int>(order.size()) == 0) {
      z = compress_columns(z, 1e-15);
    }
  }
  if (!(res <= std::max(options.tolerance, 1e-6))) {
    throw StabilityError("lowrank_lyapunov_adi: no convergence (residual " + std::to_string(res) + ")");
  }
  result.z = compress_columns(z, 1e-15);
  result.relative_residual = res;
  result.iterations = it;
  return result;
}

}  // namespace geostore::numerics
