#include "geostore/mor.hpp"

#include "geostore/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>

namespace geostore::mor {

namespace {

ReducedSystem truncate_from_factors(const Matrix& a_dense, const SparseMatrix* a_sparse,
                                    const Matrix& b, const Matrix& c, const Matrix& lc,
                                    const Matrix& lo, int ell, double rank_tol) {
  const Matrix cross = lo.transpose() * lc;
  Eigen::BDCSVD<Matrix> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  int rank = 0;
  while (rank < s.size() && s(rank) > rank_tol * s(0)) ++rank;
  if (ell > rank) {
    throw RankError("balanced_truncation: ell = " + std::to_string(ell) + " exceeds numerical rank " +
                    std::to_string(rank));
  }
  const Vector inv_sqrt = s.head(ell).cwiseSqrt().cwiseInverse();
  const Matrix t = lc * svd.matrixV().leftCols(ell) * inv_sqrt.asDiagonal();
  const Matrix w = lo * svd.matrixU().leftCols(ell) * inv_sqrt.asDiagonal();

  ReducedSystem red;
  red.ell = ell;
  if (a_sparse != nullptr) {
    const Matrix at_w = a_sparse->transpose() * w;
    red.a_bar = at_w.transpose() * t;
  } else {
    red.a_bar = w.transpose() * a_dense * t;
  }
  red.b = w.transpose() * b;
  red.c = c * t;
  red.hankel_sv = s.head(rank);
  red.alignment = Matrix::Identity(ell, ell);

  const auto abscissa = numerics::spectral_abscissa(numerics::real_schur(red.a_bar));
  if (!(abscissa < 0.0)) {
    throw StabilityError("balanced_truncation: reduced matrix is not stable (abscissa " +
                         std::to_string(abscissa) + ")");
  }
  return red;
}

void check_ell(int ell, Eigen::Index n) {
  if (ell < 1 || ell > n) throw RankError("balanced_truncation: need 1 <= ell <= n");
}

}  // namespace

ReducedSystem balanced_truncation(const LtiSystem& full, int ell, double rank_tolerance) {
  const Eigen::Index n = full.a.rows();
  if (full.a.cols() != n || full.b.rows() != n || full.c.cols() != n) {
    throw DimensionError("balanced_truncation: inconsistent dimensions");
  }
  check_ell(ell, n);
  const numerics::SchurForm schur = numerics::real_schur(full.a);
  if (!(numerics::spectral_abscissa(schur) < 0.0)) {
    throw StabilityError("balanced_truncation: full system is not stable");
  }
  const Matrix p = numerics::solve_lyapunov(schur, full.b * full.b.transpose(), false);
  const Matrix q = numerics::solve_lyapunov(schur, full.c.transpose() * full.c, true);
  const Matrix lc = numerics::psd_factor(p, 1e-15);
  const Matrix lo = numerics::psd_factor(q, 1e-15);
  return truncate_from_factors(full.a, nullptr, full.b, full.c, lc, lo, ell, rank_tolerance);
}

ReducedSystem balanced_truncation(const ges::FullOrderSystem& full, int ell, const BtOptions& options) {
  check_ell(ell, full.n);
  if (options.gramian_modes.empty()) throw DomainError("balanced_truncation: no Gramian mode given");
  const Matrix b = Matrix(full.b);
  const Matrix c = full.c_matrix(options.retain_outlet);
  const bool dense = options.method == GramianMethod::Dense ||
                     (options.method == GramianMethod::Auto && full.n <= options.dense_limit);
  Matrix lc(full.n, 0);
  Matrix lo(full.n, 0);
  auto append = [](Matrix& dst, const Matrix& add) {
    Matrix grown(dst.rows(), dst.cols() + add.cols());
    grown << dst, add;
    dst.swap(grown);
  };
  for (ges::Mode mode : options.gramian_modes) {
    const SparseMatrix a = full.a(mode);
    if (dense) {
      const Matrix ad(a);
      const numerics::SchurForm schur = numerics::real_schur(ad);
      if (!(numerics::spectral_abscissa(schur) < 0.0)) {
        throw StabilityError(std::string("balanced_truncation: mode ") + ges::mode_name(mode) +
                             " is not stable");
      }
      append(lc, numerics::psd_factor(numerics::solve_lyapunov(schur, b * b.transpose(), false), 1e-15));
      append(lo, numerics::psd_factor(numerics::solve_lyapunov(schur, c.transpose() * c, true), 1e-15));
    } else {
      append(lc, numerics::lowrank_lyapunov_adi(a, b, false).z);
      append(lo, numerics::lowrank_lyapunov_adi(a, c.transpose(), true).z);
    }
  }
  ReducedSystem red = truncate_from_factors(Matrix(), &full.a_charge, b, c, lc, lo, ell,
                                            options.rank_tolerance);
  red.has_outlet_row = options.retain_outlet;
  return red;
}

ReducedSystem align_qm_coordinate(const ReducedSystem& sys) {
  const Eigen::Index ell = sys.ell;
  const RowVector cm = sys.c.row(0);
  const double norm = cm.norm();
  if (!(norm > 0.0)) throw DomainError("align_qm_coordinate: degenerate medium output row");
  // Householder H with H u = e_ell, u = c_M^T / |c_M|.
  Vector u = cm.transpose() / norm;
  Vector v = u;
  v(ell - 1) -= 1.0;
  Matrix h = Matrix::Identity(ell, ell);
  const double vv = v.squaredNorm();
  if (vv > 1e-30) h -= 2.0 * v * v.transpose() / vv;

  ReducedSystem out = sys;
  out.a_bar = h * sys.a_bar * h;
  out.b = h * sys.b;
  out.c = sys.c * h;
  out.alignment = h * sys.alignment;
  for (Eigen::Index k = 0; k + 1 < ell; ++k) out.c(0, k) = 0.0;
  out.c(0, ell - 1) = norm;
  return out;
}

OutletMap outlet_map(const GesDynamics& ges, Action a) {
  const ReducedSystem& s = ges.sys;
  if (ges.outlet_mode == OutletMode::Projected) {
    if (!s.has_outlet_row) throw DomainError("outlet_map: outlet row not retained");
    return {s.c_o(), 0.0};
  }
  switch (a) {
    case Action::ChargeGes: return {2.0 * s.c_f(), -ges.q_in_charge};
    case Action::DischargeGes: return {s.c_f(), 0.5 * ges.dt_hp};
    default: return {s.c_f(), 0.0};
  }
}

Matrix action_matrix(const GesDynamics& ges, Action a) {
  const ReducedSystem& s = ges.sys;
  if (a == Action::ChargeGes) return s.a_bar;
  const RowVector fb = (a == Action::DischargeGes) ? outlet_map(ges, a).weights : s.c_f();
  return s.a_bar + s.b.col(0) * fb;
}

Eigen::Vector2d input_g(const GesDynamics& ges, Action a, double qg) {
  switch (a) {
    case Action::ChargeGes: return {ges.q_in_charge, qg};
    case Action::DischargeGes: return {-ges.dt_hp, qg};
    default: return {0.0, qg};
  }
}

Vector forcing(const GesDynamics& ges, Action a, double qg) {
  Eigen::Vector2d g = input_g(ges, a, qg);
  if (a == Action::DischargeGes) g(0) += outlet_map(ges, a).offset;
  return ges.sys.b * g;
}

double reconstruct_outlet(const GesDynamics& ges, double q_bar_f, Action a) {
  switch (a) {
    case Action::ChargeGes: return 2.0 * q_bar_f - ges.q_in_charge;
    case Action::DischargeGes: return q_bar_f + 0.5 * ges.dt_hp;
    default: return q_bar_f;
  }
}

AffineStep affine_step(const GesDynamics& ges, Action a, double qg, double dt) {
  const Matrix am = action_matrix(ges, a);
  Eigen::PartialPivLU<Matrix> lu(am);
  if (!(lu.rcond() > 1e-12)) {
    throw SingularityError("reduced_step: A(a) is singular for action " + std::to_string(to_int(a)));
  }
  AffineStep step;
  step.e = numerics::matrix_exponential(am, dt);
  const Vector x = lu.solve(forcing(ges, a, qg));
  step.c = step.e * x - x;
  return step;
}

Vector reduced_step(const GesDynamics& ges, const Vector& y, Action a, double qg, double dt) {
  if (y.size() != ges.sys.ell) throw DimensionError("reduced_step: state size mismatch");
  const AffineStep step = affine_step(ges, a, qg, dt);
  return step.e * y + step.c;
}

Vector uniform_state(const GesDynamics& ges, double q) {
  return -ges.sys.a_bar.partialPivLu().solve(ges.sys.b * Eigen::Vector2d(q, q));
}

namespace {

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw IoError("load_reduced: matrix has wrong row count");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw IoError("load_reduced: matrix has wrong column count");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

}  // namespace

void save_reduced(const GesDynamics& ges, const std::string& path) {
  const ReducedSystem& s = ges.sys;
  nlohmann::json j;
  j["format"] = "geostore-reduced-v1";
  j["time_unit"] = "h";
  j["ell"] = s.ell;
  j["outputs"] = s.has_outlet_row ? nlohmann::json{"medium", "fluid", "outlet"}
                                  : nlohmann::json{"medium", "fluid"};
  j["a_bar"] = to_json(s.a_bar);
  j["b"] = to_json(s.b);
  j["c"] = to_json(s.c);
  j["hankel_sv"] = std::vector<double>(s.hankel_sv.data(), s.hankel_sv.data() + s.hankel_sv.size());
  j["alignment"] = to_json(s.alignment);
  j["q_in_charge_c"] = ges.q_in_charge;
  j["dt_hp_k"] = ges.dt_hp;
  j["outlet_mode"] = ges.outlet_mode == OutletMode::Projected ? "projected" : "reconstruct";
  std::ofstream os(path);
  if (!os) throw IoError("save_reduced: cannot open " + path);
  os << j.dump(1) << '\n';
  if (!os) throw IoError("save_reduced: write failed for " + path);
}

GesDynamics load_reduced(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("load_reduced: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw IoError(std::string("load_reduced: parse error: ") + e.what());
  }
  if (j.value("format", "") != "geostore-reduced-v1") throw IoError("load_reduced: unknown format");
  GesDynamics ges;
  ReducedSystem& s = ges.sys;
  s.ell = j.at("ell").get<int>();
  const auto outputs = j.at("outputs").size();
  s.has_outlet_row = outputs == 3;
  s.a_bar = matrix_from_json(j.at("a_bar"), s.ell, s.ell);
  s.b = matrix_from_json(j.at("b"), s.ell, 2);
  s.c = matrix_from_json(j.at("c"), static_cast<Eigen::Index>(outputs), s.ell);
  const auto hsv = j.at("hankel_sv").get<std::vector<double>>();
  s.hankel_sv = Eigen::Map<const Vector>(hsv.data(), static_cast<Eigen::Index>(hsv.size()));
  s.alignment = matrix_from_json(j.at("alignment"), s.ell, s.ell);
  ges.q_in_charge = j.at("q_in_charge_c").get<double>();
  ges.dt_hp = j.at("dt_hp_k").get<double>();
  ges.outlet_mode = j.at("outlet_mode").get<std::string>() == "projected" ? OutletMode::Projected
                                                                         : OutletMode::Reconstruct;
  return ges;
}

}  // namespace geostore::mor
