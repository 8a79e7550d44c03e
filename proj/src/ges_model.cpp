#include "geostore/ges_model.hpp"

#include "geostore/errors.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

namespace geostore::ges {

namespace {

constexpr double kSecondsPerHour = 3600.0;

int divide_exactly(double length, double step, const char* what) {
  if (!(step > 0.0) || !(length > 0.0)) {
    throw GeometryError(std::string("assemble_full_order: non-positive ") + what);
  }
  const double ratio = length / step;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw GeometryError(std::string("assemble_full_order: step does not divide ") + what);
  }
  return static_cast<int>(rounded);
}

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Charge: return "charge";
    case Mode::Idle: return "idle";
    case Mode::Discharge: return "discharge";
  }
  return "?";
}

SparseMatrix FullOrderSystem::a(Mode mode) const {
  if (mode == Mode::Charge) return a_charge;
  const RowVector& fb = (mode == Mode::Idle) ? c_f : c_o;
  std::vector<Eigen::Triplet<double>> trip;
  for (int cell : inlet_cells) {
    const double coef = b.coeff(cell, 0);
    for (Eigen::Index k = 0; k < fb.size(); ++k) {
      if (fb(k) != 0.0) trip.emplace_back(cell, static_cast<int>(k), coef * fb(k));
    }
  }
  SparseMatrix feedback(n, n);
  feedback.setFromTriplets(trip.begin(), trip.end());
  SparseMatrix out = a_charge + feedback;
  out.makeCompressed();
  return out;
}

Eigen::Vector2d FullOrderSystem::input(Mode mode, double qg) const {
  switch (mode) {
    case Mode::Charge: return {boundary.q_in_charge, qg};
    case Mode::Idle: return {0.0, qg};
    case Mode::Discharge: return {-boundary.dt_hp, qg};
  }
  return {0.0, qg};
}

Matrix FullOrderSystem::c_matrix(bool with_outlet) const {
  Matrix c(with_outlet ? 3 : 2, n);
  c.row(0) = c_m;
  c.row(1) = c_f;
  if (with_outlet) c.row(2) = c_o;
  return c;
}

FullOrderSystem assemble_full_order(const Geometry& geom, const MaterialParams& mat,
                                    const BoundaryParams& bnd, double hx, double hy,
                                    bool check_stability) {
  if (!(mat.rho_m > 0 && mat.rho_f > 0 && mat.cp_m > 0 && mat.cp_f > 0 && mat.kappa_m > 0 &&
        mat.kappa_f > 0)) {
    throw DomainError("assemble_full_order: material parameters must be positive");
  }
  if (!(bnd.lambda_g >= 0.0) || !(bnd.v_bar >= 0.0)) {
    throw DomainError("assemble_full_order: lambda_G and v_bar must be nonnegative");
  }
  if (!(geom.phx_height > 0.0 && geom.phx_height < geom.ly)) {
    throw GeometryError("assemble_full_order: need 0 < h_P < ly");
  }
  if (geom.n_phx != 1) throw GeometryError("assemble_full_order: exactly one PHX supported");

  FullOrderSystem sys;
  sys.nx = divide_exactly(geom.lx, hx, "lx");
  sys.ny = divide_exactly(geom.ly, hy, "ly");
  sys.hx = hx;
  sys.hy = hy;
  sys.n = sys.nx * sys.ny;
  sys.boundary = bnd;
  const int nx = sys.nx;
  const int ny = sys.ny;

  // Channel rows: an integer number of cell rows, placed nearest the
  // requested centre line.
  const double rows_exact = geom.phx_height / hy;
  const int rows = static_cast<int>(std::round(rows_exact));
  if (rows < 1 || std::abs(rows_exact - rows) > 1e-9 * std::max(1.0, rows_exact)) {
    throw GeometryError("assemble_full_order: PHX height is not a multiple of hy");
  }
  const int j0 = static_cast<int>(std::floor((geom.phx_center_y - 0.5 * geom.phx_height) / hy + 0.5));
  if (j0 < 1 || j0 + rows > ny - 1) {
    throw GeometryError("assemble_full_order: PHX channel does not fit strictly inside the domain");
  }

  sys.kind.assign(static_cast<std::size_t>(sys.n), CellKind::Medium);
  for (int j = j0; j < j0 + rows; ++j) {
    for (int i = 0; i < nx; ++i) sys.kind[static_cast<std::size_t>(j * nx + i)] = CellKind::Fluid;
    sys.inlet_cells.push_back(j * nx);
    sys.outlet_cells.push_back(j * nx + nx - 1);
  }

  auto idx = [nx](int i, int j) { return j * nx + i; };
  auto is_fluid = [&](int c) { return sys.kind[static_cast<std::size_t>(c)] == CellKind::Fluid; };
  auto kappa = [&](int c) { return is_fluid(c) ? mat.kappa_f : mat.kappa_m; };
  auto capacity = [&](int c) {
    return (is_fluid(c) ? mat.rho_f * mat.cp_f : mat.rho_m * mat.cp_m) * hx * hy;
  };

  // Conductances in W/(K m) per unit depth, divided by capacity and scaled
  // to 1/h when entered.
  std::vector<Eigen::Triplet<double>> trip_a;
  std::vector<Eigen::Triplet<double>> trip_b;
  std::vector<double> diag(static_cast<std::size_t>(sys.n), 0.0);
  auto couple = [&](int c, int d, double g) {
    const double sc = kSecondsPerHour / capacity(c);
    trip_a.emplace_back(c, d, g * sc);
    diag[static_cast<std::size_t>(c)] -= g * sc;
  };

  const double conv = mat.rho_f * mat.cp_f * bnd.v_bar * hy;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int c = idx(i, j);
      if (i > 0) couple(c, idx(i - 1, j), harmonic(kappa(c), kappa(idx(i - 1, j))) * hy / hx);
      if (i < nx - 1) couple(c, idx(i + 1, j), harmonic(kappa(c), kappa(idx(i + 1, j))) * hy / hx);
      if (j > 0) couple(c, idx(i, j - 1), harmonic(kappa(c), kappa(idx(i, j - 1))) * hx / hy);
      if (j < ny - 1) couple(c, idx(i, j + 1), harmonic(kappa(c), kappa(idx(i, j + 1))) * hx / hy);
      const double sc = kSecondsPerHour / capacity(c);
      if (j == 0 && bnd.lambda_g > 0.0) {
        // Robin bottom face in series with the half-cell conduction path.
        const double g = hx / (1.0 / bnd.lambda_g + 0.5 * hy / kappa(c));
        diag[static_cast<std::size_t>(c)] -= g * sc;
        trip_b.emplace_back(c, 1, g * sc);
      }
      if (is_fluid(c)) {
        diag[static_cast<std::size_t>(c)] -= conv * sc;
        if (i > 0) {
          trip_a.emplace_back(c, idx(i - 1, j), conv * sc);
        } else {
          const double g = conv + mat.kappa_f * hy / (0.5 * hx);
          // convective part already on the diagonal; add the Dirichlet
          // diffusive half-cell path
          diag[static_cast<std::size_t>(c)] -= (g - conv) * sc;
          trip_b.emplace_back(c, 0, g * sc);
        }
      }
    }
  }
  for (int c = 0; c < sys.n; ++c) trip_a.emplace_back(c, c, diag[static_cast<std::size_t>(c)]);
  sys.a_charge.resize(sys.n, sys.n);
  sys.a_charge.setFromTriplets(trip_a.begin(), trip_a.end());
  sys.a_charge.makeCompressed();
  sys.b.resize(sys.n, 2);
  sys.b.setFromTriplets(trip_b.begin(), trip_b.end());
  sys.b.makeCompressed();

  const OutputRows rows_out = aggregate_output_rows(sys);
  sys.c_m = rows_out.medium;
  sys.c_f = rows_out.fluid;
  sys.c_o = rows_out.outlet;

  if (check_stability) {
    std::vector<Mode> modes{Mode::Charge};
    if (bnd.lambda_g > 0.0) {
      modes.push_back(Mode::Idle);
      modes.push_back(Mode::Discharge);
    }
    for (Mode m : modes) {
      if (!metzler_hurwitz_certificate(sys.a(m))) {
        throw StabilityError(std::string("assemble_full_order: mode ") + mode_name(m) +
                             " is not stable");
      }
    }
  }
  return sys;
}

OutputRows aggregate_output_rows(const FullOrderSystem& system) {
  if (system.kind.size() != static_cast<std::size_t>(system.n)) {
    throw GeometryError("aggregate_output_rows: index map missing");
  }
  OutputRows out{RowVector::Zero(system.n), RowVector::Zero(system.n), RowVector::Zero(system.n)};
  int n_m = 0;
  int n_f = 0;
  for (int c = 0; c < system.n; ++c) {
    if (system.kind[static_cast<std::size_t>(c)] == CellKind::Fluid) {
      ++n_f;
    } else {
      ++n_m;
    }
  }
  if (n_m == 0 || n_f == 0 || system.outlet_cells.empty()) {
    throw GeometryError("aggregate_output_rows: empty region");
  }
  // Uniform cells, so area weights reduce to counts.
  for (int c = 0; c < system.n; ++c) {
    if (system.kind[static_cast<std::size_t>(c)] == CellKind::Fluid) {
      out.fluid(c) = 1.0 / n_f;
    } else {
      out.medium(c) = 1.0 / n_m;
    }
  }
  for (int c : system.outlet_cells) out.outlet(c) = 1.0 / static_cast<double>(system.outlet_cells.size());
  return out;
}

bool metzler_hurwitz_certificate(const SparseMatrix& a) {
  for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      if (it.row() != it.col() && it.value() < 0.0) return false;
    }
  }
  Eigen::SparseLU<SparseMatrix> lu(a);
  if (lu.info() != Eigen::Success) return false;
  const Vector v = lu.solve(-Vector::Ones(a.rows()));
  if (lu.info() != Eigen::Success || !v.allFinite()) return false;
  return v.minCoeff() > 0.0;
}

std::vector<FullOrderSample> simulate_full_order(const FullOrderSystem& system,
                                                 const std::vector<ScheduleEntry>& schedule,
                                                 const Vector& x0, double dt_io_h, double qg,
                                                 double max_step_s) {
  if (x0.size() != system.n) throw DimensionError("simulate_full_order: x0 size mismatch");
  if (!(dt_io_h > 0.0) || !(max_step_s > 0.0)) throw DomainError("simulate_full_order: bad step");
  const int sub = static_cast<int>(std::ceil(dt_io_h * 3600.0 / max_step_s - 1e-9));
  const double dt = dt_io_h / sub;

  std::map<Mode, Eigen::SparseLU<SparseMatrix>> factors;
  SparseMatrix ident(system.n, system.n);
  ident.setIdentity();

  Vector x = x0;
  std::vector<FullOrderSample> out;
  double t = 0.0;
  out.push_back({t, system.c_m.dot(x), system.c_f.dot(x), system.c_o.dot(x)});
  for (const auto& seg : schedule) {
    if (!(seg.duration_h > 0.0)) throw DomainError("simulate_full_order: durations must be positive");
    const double ratio = seg.duration_h / dt_io_h;
    const long steps = std::lround(ratio);
    if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
      throw DomainError("simulate_full_order: duration is not a multiple of dt_io");
    }
    auto it = factors.find(seg.mode);
    if (it == factors.end()) {
      SparseMatrix m = ident - dt * system.a(seg.mode);
      m.makeCompressed();
      it = factors.emplace(std::piecewise_construct, std::forward_as_tuple(seg.mode),
                           std::forward_as_tuple()).first;
      it->second.compute(m);
      if (it->second.info() != Eigen::Success) {
        throw StabilityError("simulate_full_order: implicit Euler matrix is singular");
      }
    }
    const Vector forcing = dt * (system.b * system.input(seg.mode, qg));
    for (long s = 0; s < steps; ++s) {
      for (int k = 0; k < sub; ++k) {
        const Vector rhs = x + forcing;  // solve() must not alias its argument
        x = it->second.solve(rhs);
      }
      t += dt_io_h;
      out.push_back({t, system.c_m.dot(x), system.c_f.dot(x), system.c_o.dot(x)});
    }
  }
  return out;
}

void write_triplets(const FullOrderSystem& system, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("write_triplets: cannot open " + path);
  os << std::setprecision(17);
  os << "# geostore full-order system, time unit h, state index = j*nx + i\n";
  os << "# n " << system.n << " nx " << system.nx << " ny " << system.ny << " hx " << system.hx
     << " hy " << system.hy << "\n";
  os << "section A_charge\n";
  for (Eigen::Index k = 0; k < system.a_charge.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(system.a_charge, k); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  os << "section B\n";
  for (Eigen::Index k = 0; k < system.b.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(system.b, k); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  os << "section C\n";
  const Matrix c = system.c_matrix(true);
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
      if (c(r, k) != 0.0) os << r << ' ' << k << ' ' << c(r, k) << '\n';
    }
  }
  os << "section cells\n";
  for (int c2 = 0; c2 < system.n; ++c2) {
    os << c2 << ' ' << c2 % system.nx << ' ' << c2 / system.nx << ' '
       << (system.kind[static_cast<std::size_t>(c2)] == CellKind::Fluid ? "fluid" : "medium") << '\n';
  }
  if (!os) throw IoError("write_triplets: write failed for " + path);
}

}  // namespace geostore::ges
