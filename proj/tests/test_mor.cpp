#include "doctest.h"

#include "geostore/errors.hpp"
#include "geostore/mor.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace geostore;
using namespace geostore::mor;

namespace {

// Step response C A^{-1} (e^{A t} - I) B of a SISO system.
double step_response(const Matrix& a, const Matrix& b, const Matrix& c, double t) {
  const Matrix ainv_b = a.partialPivLu().solve(b);
  const Matrix y = c * (numerics::matrix_exponential(a, t) * ainv_b - ainv_b);
  return y(0, 0);
}

// Largest |G(i w)| difference on a log frequency sweep.
double hinf_gap(const LtiSystem& full, const ReducedSystem& red) {
  double gap = 0.0;
  for (double w = 1e-4; w < 1e4; w *= 1.05) {
    const auto eval = [w](const Matrix& a, const Matrix& b, const Matrix& c) {
      const Eigen::MatrixXcd s = std::complex<double>(0.0, w) * Eigen::MatrixXcd::Identity(a.rows(), a.cols()) -
                                 a.cast<std::complex<double>>();
      return (c.cast<std::complex<double>>() * s.partialPivLu().solve(b.cast<std::complex<double>>()))(0, 0);
    };
    gap = std::max(gap, std::abs(eval(full.a, full.b, full.c) - eval(red.a_bar, red.b, red.c)));
  }
  return gap;
}

LtiSystem ten_state_fixture() {
  // Fixed stable SISO fixture with well separated Hankel values.
  LtiSystem s;
  const int n = 10;
  s.a = Matrix::Zero(n, n);
  s.b = Matrix(n, 1);
  s.c = Matrix(1, n);
  for (int i = 0; i < n; ++i) {
    s.a(i, i) = -0.5 * (i + 1);
    if (i + 1 < n) s.a(i, i + 1) = 0.3;
    if (i > 0) s.a(i, i - 1) = -0.2;
    s.b(i, 0) = 1.0 / (1.0 + i);
    s.c(0, i) = (i % 2 ? -1.0 : 1.0) * std::pow(0.7, i);
  }
  return s;
}

// A small reduced storage model for closure tests.
GesDynamics toy_ges() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  ReducedSystem s;
  s.ell = 3;
  s.a_bar = Matrix(3, 3);
  s.b = Matrix(3, 2);
  s.c = Matrix(2, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) s.a_bar(i, j) = i == j ? -1.0 - i : u(rng);
    s.b(i, 0) = 0.1 + 0.05 * i;
    s.b(i, 1) = 0.2;
    s.c(0, i) = 0.3 + u(rng);
    s.c(1, i) = 0.2 + u(rng);
  }
  s.alignment = Matrix::Identity(3, 3);
  GesDynamics g;
  g.sys = s;
  return g;
}

// Reduction of a 100-cell storage, used where a realistic model matters.
const GesDynamics& small_storage() {
  static const GesDynamics g = [] {
    ges::Geometry geom;
    geom.lx = 1.0;
    geom.ly = 0.2;
    geom.phx_height = 0.04;
    geom.phx_center_y = 0.1;
    const auto full = ges::assemble_full_order(geom, ges::MaterialParams{}, ges::BoundaryParams{}, 0.1, 0.02);
    BtOptions o;
    o.method = GramianMethod::Dense;
    GesDynamics out;
    out.sys = align_qm_coordinate(balanced_truncation(full, 4, o));
    return out;
  }();
  return g;
}

Vector rk4(const Matrix& a, const Vector& f, Vector y, double t, int steps) {
  const double h = t / steps;
  for (int i = 0; i < steps; ++i) {
    const Vector k1 = a * y + f;
    const Vector k2 = a * (y + 0.5 * h * k1) + f;
    const Vector k3 = a * (y + 0.5 * h * k2) + f;
    const Vector k4 = a * (y + h * k3) + f;
    y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y;
}

}  // namespace

TEST_SUITE("mor") {
  TEST_CASE("no truncation reproduces the step response") {
    const LtiSystem s = ten_state_fixture();
    const ReducedSystem r = balanced_truncation(s, 10);
    CHECK(r.ell == 10);
    for (double t : {0.1, 0.5, 1.0, 3.0, 10.0}) {
      CHECK(std::abs(step_response(s.a, s.b, s.c, t) - step_response(r.a_bar, r.b, r.c, t)) <= 1e-9);
    }
  }

  TEST_CASE("two-state diagonal system keeps the slow observable mode") {
    LtiSystem s;
    s.a = Matrix::Zero(2, 2);
    s.a(0, 0) = -1.0;
    s.a(1, 1) = -10.0;
    s.b = Matrix::Ones(2, 1);
    s.c = Matrix(1, 2);
    s.c << 1.0, 0.01;
    const ReducedSystem r = balanced_truncation(s, 1);
    REQUIRE(r.hankel_sv.size() == 2);
    const double bound = 2.0 * r.hankel_sv(1);
    CHECK(r.a_bar(0, 0) == doctest::Approx(-1.0).epsilon(1e-2));
    for (double t = 0.0; t <= 10.0; t += 0.05) {
      CHECK(std::abs(step_response(s.a, s.b, s.c, t) - step_response(r.a_bar, r.b, r.c, t)) <= bound);
    }
  }

  TEST_CASE("truncation error bound on the ten-state fixture") {
    const LtiSystem s = ten_state_fixture();
    for (int ell : {1, 2, 3, 5}) {
      const ReducedSystem r = balanced_truncation(s, ell);
      const double bound = 2.0 * r.hankel_sv.tail(r.hankel_sv.size() - ell).sum();
      CHECK(hinf_gap(s, r) <= bound + 1e-6);
      double peak = 0.0;
      for (double t = 0.0; t <= 30.0; t += 0.1) {
        peak = std::max(peak, std::abs(step_response(s.a, s.b, s.c, t) - step_response(r.a_bar, r.b, r.c, t)));
      }
      CHECK(peak <= bound + 1e-6);
    }
  }

  TEST_CASE("hankel values are nonincreasing and positive") {
    const ReducedSystem r = balanced_truncation(ten_state_fixture(), 3);
    for (Eigen::Index i = 1; i < r.hankel_sv.size(); ++i) CHECK(r.hankel_sv(i) <= r.hankel_sv(i - 1));
    CHECK(r.hankel_sv.minCoeff() > 0.0);
  }

  TEST_CASE("reduction errors") {
    LtiSystem s = ten_state_fixture();
    CHECK_THROWS_AS(balanced_truncation(s, 0), RankError);
    CHECK_THROWS_AS(balanced_truncation(s, 11), RankError);
    LtiSystem unstable = s;
    unstable.a(0, 0) = 2.0;
    CHECK_THROWS_AS(balanced_truncation(unstable, 2), StabilityError);
    // A decoupled state that the input cannot reach lowers the rank.
    LtiSystem deficient;
    deficient.a = Matrix::Zero(3, 3);
    deficient.a.diagonal() << -1.0, -2.0, -3.0;
    deficient.b = Matrix(3, 1);
    deficient.b << 1.0, 1.0, 0.0;
    deficient.c = Matrix::Ones(1, 3);
    CHECK_THROWS_AS(balanced_truncation(deficient, 3), RankError);
    CHECK_NOTHROW(balanced_truncation(deficient, 2));
  }

  TEST_CASE("alignment moves the medium row to the last coordinate") {
    const GesDynamics g = toy_ges();
    const ReducedSystem al = align_qm_coordinate(g.sys);
    const double c = g.sys.c.row(0).norm();
    for (int k = 0; k < 2; ++k) CHECK(al.c(0, k) == 0.0);
    CHECK(al.c(0, 2) == doctest::Approx(c).epsilon(1e-14));
    CHECK(al.c(0, 2) > 0.0);
    // Similarity transform: Markov parameters and spectrum are unchanged.
    for (double t : {0.0, 0.3, 1.0, 4.0}) {
      const Matrix lhs = g.sys.c * numerics::matrix_exponential(g.sys.a_bar, t) * g.sys.b;
      const Matrix rhs = al.c * numerics::matrix_exponential(al.a_bar, t) * al.b;
      CHECK((lhs - rhs).norm() <= 1e-10 * std::max(1.0, lhs.norm()));
    }
    Eigen::VectorXcd e1 = g.sys.a_bar.eigenvalues(), e2 = al.a_bar.eigenvalues();
    std::vector<double> r1, r2;
    for (Eigen::Index i = 0; i < 3; ++i) {
      r1.push_back(e1(i).real());
      r2.push_back(e2(i).real());
    }
    std::sort(r1.begin(), r1.end());
    std::sort(r2.begin(), r2.end());
    for (std::size_t i = 0; i < 3; ++i) CHECK(r1[i] == doctest::Approx(r2[i]).epsilon(1e-10));
  }

  TEST_CASE("aligning an aligned system is a no-op") {
    const ReducedSystem once = align_qm_coordinate(toy_ges().sys);
    const ReducedSystem twice = align_qm_coordinate(once);
    CHECK((twice.a_bar - once.a_bar).norm() <= 1e-14);
    CHECK((twice.b - once.b).norm() <= 1e-14);
    CHECK((twice.c - once.c).norm() <= 1e-14);
  }

  TEST_CASE("alignment is invariant to a prior rotation") {
    const GesDynamics g = toy_ges();
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    Matrix m(3, 3);
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = nd(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(m).householderQ();
    ReducedSystem rot = g.sys;
    rot.a_bar = q * g.sys.a_bar * q.transpose();
    rot.b = q * g.sys.b;
    rot.c = g.sys.c * q.transpose();
    const ReducedSystem a1 = align_qm_coordinate(g.sys), a2 = align_qm_coordinate(rot);
    Vector y1 = a1.alignment * Vector::Constant(3, 1.0);
    Vector y2 = a2.alignment * q * Vector::Constant(3, 1.0);
    for (int k = 0; k < 20; ++k) {
      CHECK((a1.c * y1 - a2.c * y2).norm() <= 1e-10);
      y1 = numerics::matrix_exponential(a1.a_bar, 0.5) * y1 + a1.b * Eigen::Vector2d(1.0, 2.0) * 0.5;
      y2 = numerics::matrix_exponential(a2.a_bar, 0.5) * y2 + a2.b * Eigen::Vector2d(1.0, 2.0) * 0.5;
    }
  }

  TEST_CASE("zero medium row cannot be aligned") {
    ReducedSystem s = toy_ges().sys;
    s.c.row(0).setZero();
    CHECK_THROWS_AS(align_qm_coordinate(s), DomainError);
  }

  TEST_CASE("action matrices") {
    const GesDynamics g = toy_ges();
    CHECK(action_matrix(g, Action::ChargeGes) == g.sys.a_bar);
    CHECK(action_matrix(g, Action::Wait) == action_matrix(g, Action::Fuel));
    CHECK(action_matrix(g, Action::Wait) == action_matrix(g, Action::OverSpill));
    const Matrix diff = action_matrix(g, Action::DischargeGes) - action_matrix(g, Action::ChargeGes);
    const Vector sv = Eigen::JacobiSVD<Matrix>(diff).singularValues();
    CHECK(sv(0) > 0.0);
    CHECK(sv(1) <= 1e-12 * sv(0));
    CHECK((diff - g.sys.b.col(0) * g.sys.c_f()).norm() <= 1e-14);
  }

  TEST_CASE("input and outlet reconstruction") {
    const GesDynamics g = toy_ges();
    CHECK(input_g(g, Action::ChargeGes, 15.0) == Eigen::Vector2d(40.0, 15.0));
    CHECK(input_g(g, Action::DischargeGes, 15.0) == Eigen::Vector2d(-3.0, 15.0));
    CHECK(input_g(g, Action::Wait, 15.0) == Eigen::Vector2d(0.0, 15.0));
    CHECK(input_g(g, Action::Fuel, 15.0) == Eigen::Vector2d(0.0, 15.0));
    CHECK(reconstruct_outlet(g, 18.0, Action::Wait) == 18.0);
    CHECK(reconstruct_outlet(g, 30.0, Action::ChargeGes) == 20.0);
    CHECK(reconstruct_outlet(g, 18.0, Action::DischargeGes) == 19.5);
  }

  TEST_CASE("discharge closure feeds back the reconstructed outlet minus the spread") {
    const GesDynamics g = toy_ges();
    const Vector y = Vector::Constant(3, 2.0);
    const double qf = g.sys.c_f().dot(y);
    const double inlet = reconstruct_outlet(g, qf, Action::DischargeGes) - g.dt_hp;
    const Vector direct = g.sys.a_bar * y + g.sys.b * Eigen::Vector2d(inlet, 15.0);
    const Vector closed = action_matrix(g, Action::DischargeGes) * y + forcing(g, Action::DischargeGes, 15.0);
    CHECK((direct - closed).norm() <= 1e-13);
  }

  TEST_CASE("reduced step: fixed point, decay, semigroup") {
    const GesDynamics g = toy_ges();
    for (Action a : kAllActions) {
      const Vector ystar = -action_matrix(g, a).partialPivLu().solve(forcing(g, a, 15.0));
      CHECK((reduced_step(g, ystar, a, 15.0, 1.0) - ystar).norm() <= 1e-12 * ystar.norm());
      const Vector y0 = Vector::Constant(3, 5.0);
      const Vector twice = reduced_step(g, reduced_step(g, y0, a, 15.0, 0.7), a, 15.0, 0.7);
      const Vector once = reduced_step(g, y0, a, 15.0, 1.4);
      CHECK((twice - once).norm() <= 1e-9 * once.norm());
    }
    GesDynamics cold = g;
    cold.q_in_charge = 0.0;
    cold.dt_hp = 0.0;
    for (Action a : {Action::Wait, Action::ChargeGes, Action::DischargeGes}) {
      CHECK(reduced_step(cold, Vector::Constant(3, 5.0), a, 0.0, 200.0).norm() <= 1e-12);
    }
    CHECK_THROWS_AS(reduced_step(g, Vector::Zero(2), Action::Wait, 15.0, 1.0), DimensionError);
  }

  TEST_CASE("reduced step matches ODE integration on a reduced storage") {
    const GesDynamics& g = small_storage();
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (Action a : kAllActions) {
      Vector y = uniform_state(g, 20.0);
      for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += u(rng);
      const Vector exact = reduced_step(g, y, a, 15.0, 1.0);
      const Vector ode = rk4(action_matrix(g, a), forcing(g, a, 15.0), y, 1.0, 20000);
      CHECK((exact - ode).norm() <= 1e-8 * exact.norm());
    }
  }

  TEST_CASE("reduced storage is stable under every action and exposes q_M directly") {
    const GesDynamics& g = small_storage();
    for (Action a : kAllActions) CHECK(action_matrix(g, a).eigenvalues().real().maxCoeff() < 0.0);
    const RowVector cm = g.sys.c_m();
    for (int k = 0; k < 3; ++k) CHECK(cm(k) == 0.0);
    CHECK(cm(3) > 0.0);
    CHECK(g.sys.hankel_sv.size() >= 4);
  }

  // The toy box is too small to discharge for long without leaving the
  // physical range, so only charge and idle run here; discharge tracking is
  // checked on the full-size geometry by the acceptance suite.
  TEST_CASE("reduced model tracks the full storage on a small grid") {
    ges::Geometry geom;
    geom.lx = 1.0;
    geom.ly = 0.2;
    geom.phx_height = 0.04;
    geom.phx_center_y = 0.1;
    const auto full = ges::assemble_full_order(geom, ges::MaterialParams{}, ges::BoundaryParams{}, 0.1, 0.02);
    const GesDynamics& g = small_storage();
    const std::vector<ges::ScheduleEntry> sched{
        {ges::Mode::Charge, 6.0}, {ges::Mode::Idle, 3.0}, {ges::Mode::Idle, 6.0}, {ges::Mode::Charge, 3.0}};
    const auto ref = ges::simulate_full_order(full, sched, Vector::Constant(full.n, 10.0), 0.5, 15.0);
    Vector y = uniform_state(g, 10.0);
    double em = 0, nm = 0;
    std::size_t k = 1;
    for (const auto& s : sched) {
      const Action a = s.mode == ges::Mode::Charge      ? Action::ChargeGes
                       : s.mode == ges::Mode::Discharge ? Action::DischargeGes
                                                        : Action::Wait;
      for (int i = 0; i < static_cast<int>(s.duration_h / 0.5); ++i, ++k) {
        y = reduced_step(g, y, a, 15.0, 0.5);
        em += std::pow(g.sys.c_m().dot(y) - ref[k].q_m, 2);
        nm += ref[k].q_m * ref[k].q_m;
      }
    }
    CHECK(std::sqrt(em / nm) <= 0.01);
  }

  TEST_CASE("reduced model round-trips through JSON") {
    GesDynamics g = small_storage();
    g.q_in_charge = 41.5;
    const auto path = std::filesystem::temp_directory_path() / "geostore_reduced_test.json";
    save_reduced(g, path.string());
    const GesDynamics back = load_reduced(path.string());
    CHECK(back.sys.ell == g.sys.ell);
    CHECK(back.sys.a_bar == g.sys.a_bar);
    CHECK(back.sys.b == g.sys.b);
    CHECK(back.sys.c == g.sys.c);
    CHECK(back.sys.hankel_sv == g.sys.hankel_sv);
    CHECK(back.q_in_charge == 41.5);
    CHECK(back.outlet_mode == OutletMode::Reconstruct);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_reduced(path.string()), IoError);
  }
}
