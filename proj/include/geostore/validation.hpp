#pragma once

#include "geostore/grid.hpp"
#include "geostore/kernel.hpp"
#include "geostore/mdp.hpp"
#include "geostore/sim.hpp"
#include "geostore/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace geostore::validation {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// "PASS name: detail" or "FAIL name: detail".
std::string format(const Check& c);

/// Largest |1 - row sum| over every set of the bundle against `tol`.
Check kernel_row_sums(const kernel::KernelBundle& bundle, double tol = 1e-8);

/// V(N, m) equals the terminal cost of grid point m exactly.
Check terminal_values(const mdp::MdpModel& model, const grid::StateGrid& grid, const solver::ValueTable& values);

/// Recomputes the Bellman minimum at `probes` random (n, m) and requires
/// bitwise equality with the stored value and action.
Check bellman_residual(const mdp::MdpModel& model, const grid::StateGrid& grid, const kernel::KernelBundle& bundle,
                       const std::vector<mdp::TransitionContext>& contexts, const solver::Solution& sol, int probes,
                       std::uint64_t seed);

/// Every stored action lies in the stored feasible set.
Check policy_feasible(const grid::StateGrid& grid, const kernel::KernelBundle& bundle,
                      const solver::PolicyTable& policy);

/// V is finite everywhere.
Check values_finite(const solver::ValueTable& values);

/// True when every price and penalty of the model is zero.
bool zero_cost_model(const mdp::MdpModel& model);

/// V identically zero (only meaningful for zero-cost models).
Check values_zero(const solver::ValueTable& values);

/// Rows of the y grid closest to an empty, half-full and full storage.
struct GesSlices {
  std::int64_t empty = 0, half = 0, full = 0;
};
GesSlices ges_slices(const mdp::MdpModel& model, const grid::StateGrid& grid);

/// Terminal cost zero where p >= p_ref and q_M >= q_ref and linear with
/// the penalty slopes elsewhere, on every grid point.
Check terminal_structure(const mdp::MdpModel& model, const grid::StateGrid& grid, const solver::ValueTable& values);

/// Structure of the last-period policy on the empty and full GES slices.
struct PolicyStructure {
  Check empty_no_discharge;
  Check empty_fuel_corner;
  Check full_no_charge;
  Check surplus_idle;  // actions in {0, -1, -2} where p > p_ref and r~ < 0
  double surplus_fraction = 0.0;
};
PolicyStructure last_period_structure(const mdp::MdpModel& model, const grid::StateGrid& grid,
                                      const solver::PolicyTable& policy, double min_fraction = 0.95);

/// Largest per-period frequency of end-of-period p-band violations.
Check chance_constraint(const sim::Summary& summary, double limit);

}  // namespace geostore::validation
