#include "geostore/validation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace geostore::validation {

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

std::string format(const Check& c) { return std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail; }

Check kernel_row_sums(const kernel::KernelBundle& bundle, double tol) {
  double worst = 0.0;
  for (const kernel::KernelSet& set : bundle.sets) worst = std::max(worst, kernel::max_row_defect(set));
  return {"kernel_row_sums", worst <= tol, "max |1 - row sum| = " + num(worst) + " (tol " + num(tol) + ")"};
}

Check terminal_values(const mdp::MdpModel& model, const grid::StateGrid& grid, const solver::ValueTable& values) {
  std::int64_t bad = 0;
  for (std::int64_t m = 0; m < grid.size(); ++m) {
    const double expect = solver::discount(model, model.horizon) * mdp::terminal_cost(grid.state(m), model);
    if (values.at(values.horizon, m) != expect) ++bad;
  }
  return {"terminal_values", bad == 0, std::to_string(bad) + " mismatching rows"};
}

Check bellman_residual(const mdp::MdpModel& model, const grid::StateGrid& grid, const kernel::KernelBundle& bundle,
                       const std::vector<mdp::TransitionContext>& contexts, const solver::Solution& sol, int probes,
                       std::uint64_t seed) {
  if (model.horizon == 0) return {"bellman_residual", true, "no periods"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_n(0, model.horizon - 1);
  std::uniform_int_distribution<std::int64_t> pick_m(0, grid.size() - 1);
  int mismatches = 0;
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    const int n = pick_n(rng);
    const std::int64_t m = pick_m(rng);
    const solver::BellmanPoint bp = solver::bellman_point(model, grid, bundle.for_period(n),
                                                          contexts[static_cast<std::size_t>(n)],
                                                          sol.values.row(n + 1), m);
    const double diff = std::abs(bp.value - sol.values.at(n, m));
    worst = std::max(worst, diff);
    if (bp.value != sol.values.at(n, m) || bp.action != sol.policy.at(n, m)) ++mismatches;
  }
  return {"bellman_residual", mismatches == 0,
          std::to_string(probes) + " probes, " + std::to_string(mismatches) + " mismatches, max |residual| = " +
              num(worst)};
}

Check policy_feasible(const grid::StateGrid& grid, const kernel::KernelBundle& bundle,
                      const solver::PolicyTable& policy) {
  std::int64_t bad = 0;
  for (int n = 0; n < policy.horizon; ++n) {
    const kernel::KernelSet& set = bundle.for_period(n);
    for (std::int64_t m = 0; m < grid.size(); ++m) {
      if (!set.allowed(m).contains(policy.at(n, m))) ++bad;
    }
  }
  return {"policy_feasible", bad == 0, std::to_string(bad) + " stored actions outside their feasible set"};
}

Check values_finite(const solver::ValueTable& values) {
  const auto bad = std::count_if(values.values.begin(), values.values.end(), [](double v) { return !std::isfinite(v); });
  return {"values_finite", bad == 0, std::to_string(bad) + " non-finite entries"};
}

bool zero_cost_model(const mdp::MdpModel& model) {
  const mdp::CostParams& c = model.costs;
  return c.xi_f == 0 && c.xi_hp == 0 && c.xi_p == 0 && c.xi_pen_p == 0 && c.xi_pen_q == 0 && c.xi_liq_p == 0 &&
         c.xi_liq_q == 0;
}

Check values_zero(const solver::ValueTable& values) {
  double worst = 0.0;
  for (double v : values.values) worst = std::max(worst, std::abs(v));
  return {"values_zero", worst == 0.0, "max |V| = " + num(worst)};
}

GesSlices ges_slices(const mdp::MdpModel& model, const grid::StateGrid& grid) {
  const mdp::ConstraintParams& c = model.cons;
  GesSlices s;
  s.empty = grid.y_project(mdp::storage_state(model.ges, c.q_lo));
  s.half = grid.y_project(mdp::storage_state(model.ges, 0.5 * (c.q_lo + c.q_hi)));
  s.full = grid.y_project(mdp::storage_state(model.ges, c.q_hi));
  return s;
}

Check terminal_structure(const mdp::MdpModel& model, const grid::StateGrid& grid, const solver::ValueTable& values) {
  const mdp::CostParams& c = model.costs;
  // kWh per kelvin of each storage.
  const double kwh_p = c.m_p * c.cp_w / 3.6e6;
  const double kwh_q = c.m_q * c.cp_m / 3.6e6;
  const double disc = solver::discount(model, model.horizon);
  const RowVector cm = model.ges.sys.c_m();
  std::int64_t zero_bad = 0, ramp_bad = 0, zero_cells = 0;
  double worst = 0.0;
  for (std::int64_t m = 0; m < grid.size(); ++m) {
    const mdp::State x = grid.state(m);
    const double q = cm.dot(x.y);
    const double v = values.at(values.horizon, m);
    if (x.p >= c.p_ref && q >= c.q_ref) {
      ++zero_cells;
      if (v != 0.0) ++zero_bad;
      continue;
    }
    const double expect =
        disc * (kwh_p * c.xi_pen_p * std::max(c.p_ref - x.p, 0.0) + kwh_q * c.xi_pen_q * std::max(c.q_ref - q, 0.0));
    const double err = std::abs(v - expect) / std::max(1.0, std::abs(expect));
    worst = std::max(worst, err);
    if (err > 1e-12) ++ramp_bad;
  }
  return {"terminal_structure", zero_bad == 0 && ramp_bad == 0,
          std::to_string(zero_cells) + " plateau cells (" + std::to_string(zero_bad) + " nonzero), ramp max rel err " +
              num(worst)};
}

PolicyStructure last_period_structure(const mdp::MdpModel& model, const grid::StateGrid& grid,
                                      const solver::PolicyTable& policy, double min_fraction) {
  PolicyStructure out;
  const int n = policy.horizon - 1;
  const GesSlices s = ges_slices(model, grid);
  const int nr = grid.r().size();
  const int np = grid.p().size();
  const double mu_r = processes::seasonality_eval(model.demand_season, model.t_at(n));

  int discharge = 0, fuel_corner = 0;
  for (int ir = 0; ir < nr; ++ir) {
    for (int ip = 0; ip < np; ++ip) {
      const Action a = policy.at(n, grid.flat(ir, ip, s.empty));
      if (a == Action::DischargeGes) ++discharge;
      if (a == Action::Fuel && 2 * ir >= nr - 1 && 2 * ip <= np - 1) ++fuel_corner;
    }
  }
  const Action corner = policy.at(n, grid.flat(nr - 1, 0, s.empty));
  out.empty_no_discharge = {"policy_empty_no_discharge", discharge == 0,
                            std::to_string(discharge) + " cells with a = +1 on the empty-GES slice"};
  out.empty_fuel_corner = {"policy_empty_fuel_corner", fuel_corner > 0,
                           std::to_string(fuel_corner) + " cells with a = +2 in the low-p/high-r quadrant; corner a = " +
                               std::to_string(to_int(corner))};

  int charge = 0;
  for (int ir = 0; ir < nr; ++ir) {
    for (int ip = 0; ip < np; ++ip) {
      if (policy.at(n, grid.flat(ir, ip, s.full)) == Action::ChargeGes) ++charge;
    }
  }
  out.full_no_charge = {"policy_full_no_charge", charge == 0,
                        std::to_string(charge) + " cells with a = -1 on the full-GES slice"};

  int cells = 0, idle = 0;
  for (std::int64_t iy : {s.empty, s.half, s.full}) {
    for (int ir = 0; ir < nr; ++ir) {
      if (mu_r + grid.r().point(ir) >= 0.0) continue;
      for (int ip = 0; ip < np; ++ip) {
        if (grid.p().point(ip) <= model.costs.p_ref) continue;
        ++cells;
        const Action a = policy.at(n, grid.flat(ir, ip, iy));
        if (a == Action::Wait || a == Action::ChargeGes || a == Action::OverSpill) ++idle;
      }
    }
  }
  out.surplus_fraction = cells > 0 ? static_cast<double>(idle) / cells : 1.0;
  out.surplus_idle = {"policy_surplus_idle", cells > 0 && out.surplus_fraction >= min_fraction,
                      std::to_string(idle) + "/" + std::to_string(cells) + " surplus cells in {0,-1,-2} (" +
                          num(100.0 * out.surplus_fraction) + "%, need " + num(100.0 * min_fraction) + "%)"};
  return out;
}

Check chance_constraint(const sim::Summary& summary, double limit) {
  double worst = 0.0, mean = 0.0;
  int worst_n = 0;
  for (int n = 0; n < summary.periods; ++n) {
    const auto k = static_cast<std::size_t>(n);
    const double f = summary.p_high_violation[k] + summary.p_low_violation[k];
    mean += f;
    if (f > worst) {
      worst = f;
      worst_n = n;
    }
  }
  if (summary.periods > 0) mean /= summary.periods;
  return {"chance_constraint", worst <= limit,
          "max per-period violation frequency " + num(worst) + " at n = " + std::to_string(worst_n) + ", mean " +
              num(mean) + " (limit " + num(limit) + ")"};
}

}  // namespace geostore::validation
