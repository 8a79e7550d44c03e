#pragma once

#include "geostore/action.hpp"
#include "geostore/mor.hpp"
#include "geostore/numerics.hpp"
#include "geostore/processes.hpp"

#include <array>
#include <string>
#include <vector>

namespace geostore::mdp {

/// Working units: hours, kW for demand, °C, EUR, kWh.
struct State {
  double r = 0.0;  // deseasonalized residual demand (kW)
  double f = 0.0;  // deseasonalized fuel price (EUR/l)
  double p = 0.0;  // IES average temperature (°C)
  Vector y;        // reduced GES state
};

/// Internal storage. Rates in 1/h; l_c and l_d in kW/K, l_f in kW.
struct IesParams {
  double p_in = 40.0;
  double p_out = 30.0;
  std::vector<double> p_amb{20.0};  // per period, last value reused
  double gamma = 3.27e-6 * 3600.0;
  double m_p = 4000.0;
  double cp_w = 4182.0;
  double kappa_p = 12.0;  // W/(m² K), informational
  double a_p = 9.096;     // m², informational
  double l_c = 1.66;
  double l_d = 1.39;
  double l_f = 74.36;

  double p_amb_at(int n) const;
  /// K per kWh of heat.
  double zeta_p() const { return 3.6e6 / (m_p * cp_w); }
  double zeta_c() const { return zeta_p() * l_c; }
  double zeta_d() const { return zeta_p() * l_d; }
  double zeta_f() const { return zeta_p() * l_f; }
  /// gamma recomputed from the loss coefficient and surface (1/h).
  double gamma_physical() const { return kappa_p * a_p / (m_p * cp_w) * 3600.0; }
};

struct ConstraintParams {
  double p_lo = 30.0, p_hi = 90.0;
  double q_lo = 10.0, q_hi = 30.0;
  double r_lo = -16.7, r_hi = 13.4;
  double epsilon = 0.05;
};

/// Prices in EUR/h, EUR/(K h) and EUR/kWh; masses in kg.
struct CostParams {
  double xi_f = 30.0;  // l/h
  double xi_hp = 3.0;
  double xi_p = 5.0;
  double xi_pen_p = 6.7, xi_pen_q = 0.45;
  double xi_liq_p = 0.0, xi_liq_q = 0.0;
  double p_ref = 60.0, q_ref = 20.0;
  double m_q = 200000.0;
  double cp_m = 800.0;
  double m_p = 4000.0;
  double cp_w = 4182.0;
  double delta = 0.0;  // 1/h
};

enum class OverspillGate {
  Gated,   // offered only when waiting risks overflowing the IES
  Strict,  // offered whenever its deterministic end temperature is in band
};

struct MdpModel {
  mor::GesDynamics ges;
  processes::OUParams demand;
  processes::Seasonality demand_season;
  processes::OUParams fuel;
  processes::Seasonality fuel_season;
  IesParams ies;
  ConstraintParams cons;
  CostParams costs;
  std::vector<double> qg{15.0};  // per period, last value reused
  int horizon = 72;
  double dt = 1.0;
  OverspillGate gate = OverspillGate::Gated;

  double qg_at(int n) const;
  double t_at(int n) const { return n * dt; }
};

/// Per-action pieces of the one-period map.
struct ActionTerms {
  Matrix e;            // exp(A(a) dt)
  Vector c;            // affine part of the Y step
  double h_const = 0;  // H = h_r r + h_const + psi_row y (h_r not used for a = -2)
  RowVector psi_row;   // nonzero only for a = -1
  double sigma_p = 0;
  double rho = 0;
  // Undiscounted running cost: cost_const + cost_f f + cost_y y.
  double cost_const = 0;
  double cost_f = 0;
  RowVector cost_y;
};

struct TransitionContext {
  int n = 0;
  double dt = 1.0;
  double decay_r = 1.0, decay_f = 1.0, decay_p = 1.0;
  double sigma_r = 0, sigma_f = 0;
  double sigma_p = 0, sigma_rp2 = 0, rho = 0;  // shared by a in {+2,+1,0,-1}
  double h_r = 0;
  double p_amb = 0;
  double mu_r = 0;
  RowVector c_m;
  std::array<ActionTerms, 5> act;

  const ActionTerms& terms(Action a) const { return act[action_index(a)]; }
  /// Mean of p' given (r, p, y) before noise.
  double mean_p(const State& x, Action a) const;
};

TransitionContext build_context(const MdpModel& model, int n);

/// Appendix-style closed forms for the (R, P) noise, exposed for tests.
struct RpNoise {
  double sigma_r2 = 0, sigma_p2 = 0, sigma_rp2 = 0;
};
RpNoise rp_noise(double beta_r, double gamma, double zeta_p, double sigma_r, double dt);

State transition(const TransitionContext& ctx, const State& x, Action a, const std::array<double, 3>& b);

State truncate_state(const State& x, const ConstraintParams& cons);

/// Exceedance probabilities of the p band for one action, on the truncated state.
struct BandRisk {
  double above = 0;
  double below = 0;
};
BandRisk band_risk(const TransitionContext& ctx, const State& x_trunc, Action a, const ConstraintParams& cons);

/// Why an action was excluded (for provenance and diagnostics).
enum ExclusionReason : std::uint8_t {
  kNone = 0,
  kGesFull = 1,
  kGesEmpty = 2,
  kIesHigh = 4,
  kIesLow = 8,
  kOverspillGate = 16,
};

struct Feasibility {
  ActionSet allowed;
  std::array<std::uint8_t, 5> reason{};  // per action_index
};

Feasibility feasibility(const TransitionContext& ctx, const State& x, const MdpModel& model);

/// Throws InfeasibilityError with all band probabilities when empty.
ActionSet feasible_actions(const TransitionContext& ctx, const State& x, const MdpModel& model);

/// Undiscounted one-period running cost (EUR); the caller applies exp(-delta n dt).
double running_cost(const TransitionContext& ctx, const State& x, Action a);

/// Terminal cost from the IES temperature and the GES medium average (EUR).
double terminal_cost(double p, double q_m, const CostParams& costs);
double terminal_cost(const State& x, const MdpModel& model);

/// Checks the structural assumptions of the model at build time; returns
/// one message per violation.
std::vector<std::string> check_assumptions(const MdpModel& model, std::uint64_t seed = 7);

/// Reduced state with medium average exactly q: the uniform-temperature
/// equilibrium, corrected along the aligned coordinate.
Vector storage_state(const mor::GesDynamics& ges, double q);

}  // namespace geostore::mdp
