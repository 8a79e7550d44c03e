#pragma once

#include "geostore/numerics.hpp"

#include <array>
#include <string>
#include <vector>

namespace geostore::ges {

/// Rectangular cross-section with one straight horizontal PHX channel from
/// the left (inlet) to the right (outlet) boundary.
struct Geometry {
  double lx = 10.0;         // m
  double ly = 1.0;          // m
  double lz = 10.0;         // m, bookkeeping only
  double phx_height = 0.02; // m
  double phx_center_y = 0.5;  // m, channel centre line
  int n_phx = 1;
};

struct MaterialParams {
  double rho_m = 2000.0;   // kg/m^3
  double rho_f = 998.0;
  double cp_m = 800.0;     // J/(kg K)
  double cp_f = 4182.0;
  double kappa_m = 1.59;   // W/(m K)
  double kappa_f = 0.60;

  double d_m() const { return kappa_m / (rho_m * cp_m); }  // m^2/s
  double d_f() const { return kappa_f / (rho_f * cp_f); }
};

struct BoundaryParams {
  double lambda_g = 10.0;     // W/(m^2 K)
  double q_in_charge = 40.0;  // °C
  double dt_hp = 3.0;         // K
  double v_bar = 0.01;        // m/s
};

enum class Mode { Charge, Idle, Discharge };

const char* mode_name(Mode m);

enum class CellKind : unsigned char { Medium = 0, Fluid = 1 };

/// Semi-discretized storage, time unit hours. State index = j * nx + i with
/// i along x and j along y (j = 0 at the bottom).
struct FullOrderSystem {
  int nx = 0;
  int ny = 0;
  double hx = 0.0;
  double hy = 0.0;
  int n = 0;
  std::vector<CellKind> kind;
  std::vector<int> inlet_cells;
  std::vector<int> outlet_cells;
  SparseMatrix a_charge;  // Dirichlet inlet
  SparseMatrix b;         // n x 2: inlet channel, underground channel
  RowVector c_m;
  RowVector c_f;
  RowVector c_o;
  BoundaryParams boundary;

  SparseMatrix a(Mode mode) const;
  /// Input vector g(mode) = (inlet value, Q^G).
  Eigen::Vector2d input(Mode mode, double qg) const;
  /// Output rows stacked as C (3 x n): medium, fluid, outlet.
  Matrix c_matrix(bool with_outlet) const;
};

FullOrderSystem assemble_full_order(const Geometry& geom, const MaterialParams& materials,
                                    const BoundaryParams& boundary, double hx, double hy,
                                    bool check_stability = true);

struct OutputRows {
  RowVector medium;
  RowVector fluid;
  RowVector outlet;
};

OutputRows aggregate_output_rows(const FullOrderSystem& system);

/// Certificate for a Metzler matrix: A v = -1 has a positive solution.
bool metzler_hurwitz_certificate(const SparseMatrix& a);

struct ScheduleEntry {
  Mode mode = Mode::Idle;
  double duration_h = 0.0;
};

struct FullOrderSample {
  double t_h = 0.0;
  double q_m = 0.0;
  double q_f = 0.0;
  double q_o = 0.0;
};

/// Implicit Euler with step at most max_step_s seconds; durations must be
/// multiples of dt_io_h.
std::vector<FullOrderSample> simulate_full_order(const FullOrderSystem& system,
                                                 const std::vector<ScheduleEntry>& schedule,
                                                 const Vector& x0, double dt_io_h, double qg,
                                                 double max_step_s = 10.0);

/// Text dump: header lines start with '#', sections "A_charge", "B" and
/// "C" list "row col value" triplets, section "cells" lists "index i j kind".
void write_triplets(const FullOrderSystem& system, const std::string& path);

}  // namespace geostore::ges
