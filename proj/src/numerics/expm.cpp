#include "geostore/errors.hpp"
#include "geostore/numerics.hpp"

#include <cmath>

namespace geostore::numerics {

namespace {

constexpr double kTheta13 = 5.371920351148152;

constexpr double kPade13[] = {64764752532480000.0,
                              32382376266240000.0,
                              7771770303897600.0,
                              1187353796428800.0,
                              129060195264000.0,
                              10559470521600.0,
                              670442572800.0,
                              33522128640.0,
                              1323241920.0,
                              40840800.0,
                              960960.0,
                              16380.0,
                              182.0,
                              1.0};

}  // namespace

Matrix matrix_exponential(const Matrix& a, double t) {
  if (a.rows() != a.cols()) {
    throw DimensionError("matrix_exponential: matrix is not square");
  }
  if (!std::isfinite(t) || !a.allFinite()) {
    throw DomainError("matrix_exponential: non-finite input");
  }
  const Eigen::Index n = a.rows();
  if (n == 0) return Matrix(0, 0);

  Matrix m = a * t;
  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    m /= std::ldexp(1.0, squarings);
  }

  const Matrix ident = Matrix::Identity(n, n);
  const Matrix m2 = m * m;
  const Matrix m4 = m2 * m2;
  const Matrix m6 = m4 * m2;
  const double* b = kPade13;

  Matrix u_inner = m6 * (b[13] * m6 + b[11] * m4 + b[9] * m2);
  u_inner += b[7] * m6 + b[5] * m4 + b[3] * m2 + b[1] * ident;
  const Matrix u = m * u_inner;
  Matrix v = m6 * (b[12] * m6 + b[10] * m4 + b[8] * m2);
  v += b[6] * m6 + b[4] * m4 + b[2] * m2 + b[0] * ident;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

}  // namespace geostore::numerics
