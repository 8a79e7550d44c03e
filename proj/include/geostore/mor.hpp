#pragma once

#include "geostore/action.hpp"
#include "geostore/ges_model.hpp"
#include "geostore/numerics.hpp"

#include <string>
#include <vector>

namespace geostore::mor {

/// Dense state-space triple x' = A x + B u, z = C x.
struct LtiSystem {
  Matrix a;
  Matrix b;
  Matrix c;
};

/// Reduced triple. Output rows of `c`: 0 = medium average, 1 = fluid
/// average, 2 = outlet average (only when retained). Toy systems may carry
/// fewer rows.
struct ReducedSystem {
  int ell = 0;
  Matrix a_bar;
  Matrix b;
  Matrix c;
  bool has_outlet_row = false;
  Vector hankel_sv;
  Matrix alignment;  // orthogonal change of basis applied after truncation

  RowVector c_m() const { return c.row(0); }
  RowVector c_f() const { return c.row(1); }
  RowVector c_o() const { return c.row(2); }
};

enum class GramianMethod { Auto, Dense, LowRankAdi };

struct BtOptions {
  bool retain_outlet = false;
  GramianMethod method = GramianMethod::Auto;
  int dense_limit = 600;           // Auto switches to ADI above this n
  double rank_tolerance = 1e-13;   // relative to the largest Hankel value
  /// Operating modes whose Gramians are summed before balancing.
  std::vector<ges::Mode> gramian_modes{ges::Mode::Charge, ges::Mode::Idle, ges::Mode::Discharge};
};

ReducedSystem balanced_truncation(const LtiSystem& full, int ell,
                                  double rank_tolerance = 1e-13);

/// Balances the summed Gramians of the selected modes and projects the
/// charge-mode matrix; the closures of the other modes are
/// formed afterwards in reduced coordinates.
ReducedSystem balanced_truncation(const ges::FullOrderSystem& full, int ell,
                                  const BtOptions& options = {});

/// Orthogonal change of basis after which c_M = (0, ..., 0, c) with c > 0.
ReducedSystem align_qm_coordinate(const ReducedSystem& sys);

/// How the outlet average enters the closures and costs.
enum class OutletMode {
  Reconstruct,  // from the fluid average, linear-profile formula
  Projected,    // retained reduced output row c_O
};

/// Reduced system together with the boundary data the action closures need.
struct GesDynamics {
  ReducedSystem sys;
  double q_in_charge = 40.0;
  double dt_hp = 3.0;
  OutletMode outlet_mode = OutletMode::Reconstruct;
};

/// Q^O ≈ weights · y + offset under action a.
struct OutletMap {
  RowVector weights;
  double offset = 0.0;
};

OutletMap outlet_map(const GesDynamics& ges, Action a);

Matrix action_matrix(const GesDynamics& ges, Action a);

/// Input g(a) = (inlet value, Q^G) before any outlet closure.
Eigen::Vector2d input_g(const GesDynamics& ges, Action a, double qg);

/// Constant forcing of the closed-loop reduced ODE y' = A(a) y + f(a).
Vector forcing(const GesDynamics& ges, Action a, double qg);

double reconstruct_outlet(const GesDynamics& ges, double q_bar_f, Action a);

struct AffineStep {
  Matrix e;  // exp(A(a) dt)
  Vector c;  // (exp(A(a) dt) - I) A(a)^{-1} f(a)
};

AffineStep affine_step(const GesDynamics& ges, Action a, double qg, double dt);

Vector reduced_step(const GesDynamics& ges, const Vector& y, Action a, double qg, double dt);

/// Reduced state of a storage at uniform temperature q (charge-mode
/// equilibrium with both inputs equal to q).
Vector uniform_state(const GesDynamics& ges, double q);

/// Structured text (JSON) serialization.
void save_reduced(const GesDynamics& ges, const std::string& path);
GesDynamics load_reduced(const std::string& path);

}  // namespace geostore::mor
