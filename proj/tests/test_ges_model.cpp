#include "doctest.h"

#include "geostore/errors.hpp"
#include "geostore/ges_model.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace geostore;
using namespace geostore::ges;

namespace {

// 1 m x 0.2 m box with a two-row channel; small enough for dense checks.
Geometry small_box() {
  Geometry g;
  g.lx = 1.0;
  g.ly = 0.2;
  g.phx_height = 0.04;
  g.phx_center_y = 0.1;
  return g;
}

Vector row_sums(const SparseMatrix& a) { return Matrix(a).rowwise().sum(); }

}  // namespace

TEST_SUITE("ges-model") {
  TEST_CASE("paper grid size and index map") {
    const FullOrderSystem sys = assemble_full_order(Geometry{}, MaterialParams{}, BoundaryParams{}, 0.1, 0.01);
    CHECK(sys.nx == 100);
    CHECK(sys.ny == 100);
    CHECK(sys.n == 10000);
    CHECK(sys.a_charge.rows() == 10000);
    CHECK(sys.b.cols() == 2);
    int fluid = 0;
    for (CellKind k : sys.kind) fluid += k == CellKind::Fluid;
    CHECK(fluid == 200);
    CHECK(sys.inlet_cells.size() == 2);
    CHECK(sys.outlet_cells.size() == 2);
    for (int c : sys.inlet_cells) CHECK(c % sys.nx == 0);
    for (int c : sys.outlet_cells) CHECK(c % sys.nx == sys.nx - 1);
  }

  TEST_CASE("diffusivities") {
    const MaterialParams m;
    CHECK(m.d_m() == doctest::Approx(1.59 / (2000.0 * 800.0)).epsilon(1e-12));
    CHECK(m.d_f() == doctest::Approx(0.60 / (998.0 * 4182.0)).epsilon(1e-12));
  }

  TEST_CASE("insulated uniform medium without flow conserves heat") {
    MaterialParams uniform;
    uniform.rho_f = uniform.rho_m;
    uniform.cp_f = uniform.cp_m;
    uniform.kappa_f = uniform.kappa_m;
    BoundaryParams b;
    b.lambda_g = 0.0;
    b.v_bar = 0.0;
    const FullOrderSystem sys = assemble_full_order(small_box(), uniform, b, 0.1, 0.02);
    // The idle closure feeds the inlet back from inside the domain, so
    // every row of the closed matrix sums to zero.
    CHECK(row_sums(sys.a(Mode::Idle)).cwiseAbs().maxCoeff() <= 1e-10 * Matrix(sys.a(Mode::Idle)).cwiseAbs().maxCoeff());
    // Away from the inlet the open matrix is already conservative.
    const Vector rs = row_sums(sys.a_charge);
    for (int c = 0; c < sys.n; ++c) {
      if (c % sys.nx != 0) CHECK(std::abs(rs(c)) <= 1e-9);
    }
  }

  TEST_CASE("uniform field at the ground temperature is an idle equilibrium") {
    const FullOrderSystem sys = assemble_full_order(small_box(), MaterialParams{}, BoundaryParams{}, 0.1, 0.02);
    const double qg = 15.0;
    const Vector x = Vector::Constant(sys.n, qg);
    const Vector dx = sys.a(Mode::Idle) * x + sys.b * sys.input(Mode::Idle, qg);
    CHECK(dx.norm() <= 1e-9);
  }

  TEST_CASE("output rows are averaging vectors") {
    const FullOrderSystem sys = assemble_full_order(small_box(), MaterialParams{}, BoundaryParams{}, 0.1, 0.02);
    const OutputRows rows = aggregate_output_rows(sys);
    for (const RowVector* r : {&rows.medium, &rows.fluid, &rows.outlet}) {
      CHECK(r->minCoeff() >= 0.0);
      CHECK(r->sum() == doctest::Approx(1.0).epsilon(1e-14));
    }
    const Vector ten = Vector::Constant(sys.n, 10.0);
    CHECK(rows.medium.dot(ten) == doctest::Approx(10.0));
    CHECK(rows.fluid.dot(ten) == doctest::Approx(10.0));
    CHECK(rows.outlet.dot(ten) == doctest::Approx(10.0));
    Vector ind(sys.n);
    for (int c = 0; c < sys.n; ++c) ind(c) = sys.kind[static_cast<std::size_t>(c)] == CellKind::Fluid ? 1.0 : 0.0;
    CHECK(rows.fluid.dot(ind) == doctest::Approx(1.0));
    CHECK(rows.medium.dot(ind) == 0.0);
  }

  TEST_CASE("checkerboard averages on a 4x4 grid") {
    Geometry g;
    g.lx = 0.4;
    g.ly = 0.4;
    g.phx_height = 0.1;
    g.phx_center_y = 0.15;
    const FullOrderSystem sys = assemble_full_order(g, MaterialParams{}, BoundaryParams{}, 0.1, 0.1);
    REQUIRE(sys.n == 16);
    Vector x(16);
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 4; ++i) x(j * 4 + i) = (i + j) % 2 ? 3.0 : -1.0;
    }
    // Channel is row j = 1: cells 4..7 carry -1, 3, -1, 3.
    CHECK(sys.c_f.dot(x) == doctest::Approx(1.0));
    // Medium: rows 0, 2, 3 with the same alternation, 12 cells.
    CHECK(sys.c_m.dot(x) == doctest::Approx(1.0));
    // Outlet is cell (3, 1): (3 + 1) even.
    CHECK(sys.c_o.dot(x) == doctest::Approx(-1.0));
    Vector y = Vector::Zero(16);
    y(0) = 12.0;
    y(5) = 8.0;
    CHECK(sys.c_m.dot(y) == doctest::Approx(1.0));
    CHECK(sys.c_f.dot(y) == doctest::Approx(2.0));
  }

  TEST_CASE("every mode is stable") {
    const FullOrderSystem sys = assemble_full_order(small_box(), MaterialParams{}, BoundaryParams{}, 0.1, 0.02);
    for (Mode m : {Mode::Charge, Mode::Idle, Mode::Discharge}) {
      CHECK(metzler_hurwitz_certificate(sys.a(m)));
      const Eigen::VectorXcd ev = Matrix(sys.a(m)).eigenvalues();
      CHECK(ev.real().maxCoeff() < 0.0);
    }
  }

  TEST_CASE("steady charge state obeys the maximum principle") {
    const FullOrderSystem sys = assemble_full_order(small_box(), MaterialParams{}, BoundaryParams{}, 0.1, 0.02);
    Eigen::SparseLU<SparseMatrix> lu(sys.a_charge);
    const Vector xs = lu.solve(-(sys.b * sys.input(Mode::Charge, 15.0)));
    CHECK(xs.minCoeff() >= 15.0 - 1e-9);
    CHECK(xs.maxCoeff() <= 40.0 + 1e-9);
  }

  TEST_CASE("insulated idle storage keeps its temperature") {
    BoundaryParams b;
    b.lambda_g = 0.0;
    const FullOrderSystem sys = assemble_full_order(small_box(), MaterialParams{}, b, 0.1, 0.02);
    const auto out = simulate_full_order(sys, {{Mode::Idle, 24.0}}, Vector::Constant(sys.n, 10.0), 1.0, 15.0);
    REQUIRE(out.size() == 25);
    for (const auto& s : out) {
      CHECK(s.q_m == doctest::Approx(10.0).epsilon(1e-12));
      CHECK(s.q_f == doctest::Approx(10.0).epsilon(1e-12));
      CHECK(s.q_o == doctest::Approx(10.0).epsilon(1e-12));
    }
  }

  TEST_CASE("charging from a cold storage heats it monotonically") {
    const FullOrderSystem sys = assemble_full_order(small_box(), MaterialParams{}, BoundaryParams{}, 0.1, 0.02);
    const auto out = simulate_full_order(sys, {{Mode::Charge, 24.0}}, Vector::Constant(sys.n, 10.0), 0.5, 10.0);
    for (std::size_t k = 1; k < out.size(); ++k) {
      CHECK(out[k].q_m >= out[k - 1].q_m - 1e-12);
      CHECK(out[k].q_f >= out[k - 1].q_f - 1e-12);
      CHECK(out[k].q_f <= 40.0);
      CHECK(out[k].t_h == doctest::Approx(0.5 * k));
    }
    CHECK(out.back().q_m > 10.5);
  }

  TEST_CASE("halving the mesh changes a 12 h charge by at most 2 percent") {
    const auto run = [](double hx, double hy) {
      const FullOrderSystem sys = assemble_full_order(Geometry{}, MaterialParams{}, BoundaryParams{}, hx, hy);
      return simulate_full_order(sys, {{Mode::Charge, 12.0}}, Vector::Constant(sys.n, 10.0), 1.0, 15.0, 10.0);
    };
    // The configured mesh against its halving; coarser meshes are not yet
    // in the asymptotic range (0.25/0.02 m differs by about 3%).
    const auto coarse = run(0.1, 0.01);
    const auto fine = run(0.05, 0.005);
    REQUIRE(coarse.size() == fine.size());
    for (std::size_t k = 0; k < coarse.size(); ++k) {
      CHECK(std::abs(coarse[k].q_m - fine[k].q_m) <= 0.02 * std::abs(fine[k].q_m));
      CHECK(std::abs(coarse[k].q_f - fine[k].q_f) <= 0.02 * std::abs(fine[k].q_f));
    }
  }

  TEST_CASE("geometry errors") {
    CHECK_THROWS_AS(assemble_full_order(Geometry{}, MaterialParams{}, BoundaryParams{}, 0.3, 0.01), GeometryError);
    CHECK_THROWS_AS(assemble_full_order(Geometry{}, MaterialParams{}, BoundaryParams{}, 0.1, 0.03), GeometryError);
    Geometry edge;
    edge.phx_center_y = 0.01;
    CHECK_THROWS_AS(assemble_full_order(edge, MaterialParams{}, BoundaryParams{}, 0.1, 0.01), GeometryError);
    MaterialParams bad;
    bad.kappa_m = 0.0;
    CHECK_THROWS_AS(assemble_full_order(Geometry{}, bad, BoundaryParams{}, 0.1, 0.01), DomainError);
  }

  TEST_CASE("simulation rejects bad schedules") {
    const FullOrderSystem sys = assemble_full_order(small_box(), MaterialParams{}, BoundaryParams{}, 0.1, 0.02);
    const Vector x0 = Vector::Constant(sys.n, 10.0);
    CHECK_THROWS_AS(simulate_full_order(sys, {{Mode::Idle, 1.5}}, x0, 1.0, 15.0), DomainError);
    CHECK_THROWS_AS(simulate_full_order(sys, {{Mode::Idle, -1.0}}, x0, 1.0, 15.0), DomainError);
    CHECK_THROWS_AS(simulate_full_order(sys, {{Mode::Idle, 1.0}}, Vector::Zero(3), 1.0, 15.0), DimensionError);
  }

  TEST_CASE("triplet dump lists every section") {
    const FullOrderSystem sys = assemble_full_order(small_box(), MaterialParams{}, BoundaryParams{}, 0.1, 0.02);
    const auto path = std::filesystem::temp_directory_path() / "geostore_triplets_test.txt";
    write_triplets(sys, path.string());
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    for (const char* s : {"A_charge", "B", "C", "cells"}) CHECK(text.find(s) != std::string::npos);
    std::filesystem::remove(path);
  }
}
