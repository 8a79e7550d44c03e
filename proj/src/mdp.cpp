#include "geostore/mdp.hpp"

#include "geostore/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace geostore::mdp {

namespace {

double at_or_last(const std::vector<double>& v, int n) {
  if (v.empty()) throw DomainError("per-period parameter list is empty");
  if (n < 0) n = 0;
  return v[std::min<std::size_t>(static_cast<std::size_t>(n), v.size() - 1)];
}

// ∫_0^dt exp(M s) ds, read off the exponential of [[M, I], [0, 0]].
Matrix integral_exp(const Matrix& m, double dt) {
  const Eigen::Index k = m.rows();
  Matrix aug = Matrix::Zero(2 * k, 2 * k);
  aug.topLeftCorner(k, k) = m;
  aug.topRightCorner(k, k) = Matrix::Identity(k, k);
  return numerics::matrix_exponential(aug, dt).topRightCorner(k, k);
}

}  // namespace

double IesParams::p_amb_at(int n) const { return at_or_last(p_amb, n); }

double MdpModel::qg_at(int n) const { return at_or_last(qg, n); }

RpNoise rp_noise(double beta_r, double gamma, double zeta_p, double sigma_r, double dt) {
  RpNoise out;
  if (sigma_r == 0.0) return out;
  const double b = beta_r, g = gamma, s2 = sigma_r * sigma_r;
  const double e_bg = std::exp(-(b + g) * dt);
  const double e_2b = std::exp(-2.0 * b * dt);
  const double e_2g = std::exp(-2.0 * g * dt);
  out.sigma_r2 = s2 / (2.0 * b) * (-std::expm1(-2.0 * b * dt));
  const double brace = g + 4.0 * b * e_bg - (b + g) * e_2b - b * (2.0 + e_2g) +
                       b * b / g * (-std::expm1(-2.0 * g * dt));
  out.sigma_p2 = zeta_p * zeta_p * s2 / (2.0 * b * (b - g) * (b - g) * (b + g)) * brace;
  out.sigma_rp2 = -zeta_p * s2 / (2.0 * b * (b * b - g * g)) * (b - g - 2.0 * b * e_bg + (b + g) * e_2b);
  return out;
}

double TransitionContext::mean_p(const State& x, Action a) const {
  const ActionTerms& t = terms(a);
  if (a == Action::OverSpill) return decay_p * x.p + t.h_const;
  double m = decay_p * x.p + h_r * x.r + t.h_const;
  if (t.psi_row.size() > 0) m += t.psi_row.dot(x.y);
  return m;
}

TransitionContext build_context(const MdpModel& model, int n) {
  const mor::GesDynamics& ges = model.ges;
  const IesParams& ies = model.ies;
  const double dt = model.dt;
  const double beta_r = model.demand.beta;
  const double gamma = ies.gamma;
  if (!(dt > 0.0)) throw DomainError("build_context: dt must be positive");
  if (!(gamma > 0.0)) throw DomainError("build_context: gamma must be positive");
  if (std::abs(beta_r - gamma) <= 1e-8) {
    throw DomainError("build_context: demand beta equals IES gamma (|beta_R - gamma| <= 1e-8 1/h); "
                      "perturb one of them");
  }
  const Eigen::VectorXcd eig = ges.sys.a_bar.eigenvalues();
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (std::abs(eig(i) + gamma) <= 1e-8) {
      throw SingularityError("build_context: -gamma is an eigenvalue of the reduced matrix");
    }
  }

  TransitionContext ctx;
  ctx.n = n;
  ctx.dt = dt;
  ctx.decay_r = std::exp(-beta_r * dt);
  ctx.decay_f = std::exp(-model.fuel.beta * dt);
  ctx.decay_p = std::exp(-gamma * dt);
  ctx.sigma_r = processes::ou_step_sd(model.demand, n, dt);
  ctx.sigma_f = processes::ou_step_sd(model.fuel, n, dt);
  const RpNoise noise = rp_noise(beta_r, gamma, ies.zeta_p(), model.demand.sigma_at(n), dt);
  ctx.sigma_p = std::sqrt(std::max(0.0, noise.sigma_p2));
  ctx.sigma_rp2 = noise.sigma_rp2;
  ctx.rho = (ctx.sigma_r > 0.0 && ctx.sigma_p > 0.0)
                ? std::clamp(noise.sigma_rp2 / (ctx.sigma_r * ctx.sigma_p), -1.0, 1.0)
                : 0.0;
  ctx.h_r = ies.zeta_p() / (beta_r - gamma) * (ctx.decay_r - ctx.decay_p);
  ctx.p_amb = ies.p_amb_at(n);
  ctx.mu_r = processes::seasonality_eval(model.demand_season, model.t_at(n));
  ctx.c_m = ges.sys.c_m();

  const double loss = -std::expm1(-gamma * dt);  // 1 - e^{-gamma dt}
  const double phi_g = numerics::phi_delta(gamma, dt);
  const double base = -ies.zeta_p() * ctx.mu_r * phi_g + ctx.p_amb * loss;
  const double qg = model.qg_at(n);
  const double delta = model.costs.delta;
  const double phi = numerics::phi_delta(delta, dt);
  const CostParams& cp = model.costs;
  const double mu_f = processes::seasonality_eval(model.fuel_season, model.t_at(n));
  const Eigen::Index ell = ges.sys.ell;

  for (Action a : kAllActions) {
    ActionTerms& t = ctx.act[action_index(a)];
    const mor::AffineStep step = mor::affine_step(ges, a, qg, dt);
    t.e = step.e;
    t.c = step.c;
    t.sigma_p = ctx.sigma_p;
    t.rho = ctx.rho;
    t.cost_y = RowVector::Zero(ell);
    switch (a) {
      case Action::Fuel:
        t.h_const = base + ies.zeta_f() * phi_g;
        t.cost_const = cp.xi_f * mu_f * phi;
        t.cost_f = cp.xi_f * numerics::phi_delta(delta + model.fuel.beta, dt);
        break;
      case Action::DischargeGes: {
        t.h_const = base + ies.zeta_c() * (ies.p_in - ies.p_out) * phi_g;
        const Matrix am = mor::action_matrix(ges, a);
        const mor::OutletMap om = mor::outlet_map(ges, a);
        const Matrix m2 = integral_exp(am - delta * Matrix::Identity(ell, ell), dt);
        const Vector eq = am.partialPivLu().solve(mor::forcing(ges, a, qg));
        t.cost_y = -cp.xi_hp * om.weights * m2;
        t.cost_const = (cp.xi_hp * (ies.p_in - om.offset) + cp.xi_p) * phi -
                       cp.xi_hp * om.weights.dot((m2 - phi * Matrix::Identity(ell, ell)) * eq);
        break;
      }
      case Action::Wait:
        t.h_const = base;
        break;
      case Action::ChargeGes: {
        const mor::OutletMap om = mor::outlet_map(ges, a);
        const Matrix& abar = ges.sys.a_bar;
        const Matrix m1 = integral_exp(gamma * Matrix::Identity(ell, ell) + abar, dt);
        const Vector eq = abar.partialPivLu().solve(mor::forcing(ges, a, qg));
        const double grow = std::expm1(gamma * dt) / gamma;
        const double psi_const =
            ies.zeta_d() * om.weights.dot((m1 - grow * Matrix::Identity(ell, ell)) * eq);
        t.psi_row = ctx.decay_p * ies.zeta_d() * om.weights * m1;
        t.h_const = base - ies.zeta_d() * (ges.q_in_charge - om.offset) * phi_g + ctx.decay_p * psi_const;
        t.cost_const = cp.xi_p * phi;
        break;
      }
      case Action::OverSpill:
        t.h_const = ctx.p_amb * loss;
        t.sigma_p = 0.0;
        t.rho = 0.0;
        break;
    }
  }
  return ctx;
}

State transition(const TransitionContext& ctx, const State& x, Action a, const std::array<double, 3>& b) {
  const ActionTerms& t = ctx.terms(a);
  State out;
  out.r = ctx.decay_r * x.r + ctx.sigma_r * b[0];
  out.f = ctx.decay_f * x.f + ctx.sigma_f * b[1];
  out.p = ctx.mean_p(x, a);
  if (t.sigma_p > 0.0) out.p += t.sigma_p * (std::sqrt(1.0 - t.rho * t.rho) * b[2] + t.rho * b[0]);
  out.y = t.e * x.y + t.c;
  return out;
}

State truncate_state(const State& x, const ConstraintParams& cons) {
  State out = x;
  out.r = std::clamp(x.r, cons.r_lo, cons.r_hi);
  out.p = std::clamp(x.p, cons.p_lo, cons.p_hi);
  return out;
}

BandRisk band_risk(const TransitionContext& ctx, const State& x_trunc, Action a, const ConstraintParams& cons) {
  const double mean = ctx.mean_p(x_trunc, a);
  const double sd = ctx.terms(a).sigma_p;
  BandRisk risk;
  if (sd > 0.0) {
    risk.above = numerics::std_normal_cdf((mean - cons.p_hi) / sd);
    risk.below = numerics::std_normal_cdf((cons.p_lo - mean) / sd);
  } else {
    risk.above = mean > cons.p_hi ? 1.0 : 0.0;
    risk.below = mean < cons.p_lo ? 1.0 : 0.0;
  }
  return risk;
}

Feasibility feasibility(const TransitionContext& ctx, const State& x, const MdpModel& model) {
  const ConstraintParams& cons = model.cons;
  const State xt = truncate_state(x, cons);
  Feasibility out;
  out.allowed = ActionSet::all();
  auto exclude = [&](Action a, std::uint8_t why) {
    out.allowed.erase(a);
    out.reason[action_index(a)] |= why;
  };

  const auto next_q = [&](Action a) {
    const ActionTerms& t = ctx.terms(a);
    return ctx.c_m.dot(t.e * x.y + t.c);
  };
  if (next_q(Action::ChargeGes) > cons.q_hi) exclude(Action::ChargeGes, kGesFull);
  if (next_q(Action::DischargeGes) < cons.q_lo) exclude(Action::DischargeGes, kGesEmpty);

  for (Action a : {Action::Fuel, Action::DischargeGes, Action::Wait, Action::ChargeGes}) {
    const BandRisk risk = band_risk(ctx, xt, a, cons);
    if (risk.above > cons.epsilon) exclude(a, kIesHigh);
    if (risk.below > cons.epsilon) exclude(a, kIesLow);
  }

  const double p_spill = ctx.mean_p(xt, Action::OverSpill);
  if (p_spill > cons.p_hi) exclude(Action::OverSpill, kIesHigh);
  if (p_spill < cons.p_lo) exclude(Action::OverSpill, kIesLow);
  if (model.gate == OverspillGate::Gated && band_risk(ctx, xt, Action::Wait, cons).above <= cons.epsilon) {
    exclude(Action::OverSpill, kOverspillGate);
  }
  return out;
}

ActionSet feasible_actions(const TransitionContext& ctx, const State& x, const MdpModel& model) {
  const Feasibility f = feasibility(ctx, x, model);
  if (f.allowed.empty()) {
    const State xt = truncate_state(x, model.cons);
    std::ostringstream msg;
    msg << "feasible_actions: empty set at n=" << ctx.n << " r=" << x.r << " p=" << x.p
        << " qM=" << ctx.c_m.dot(x.y) << ";";
    for (Action a : {Action::Fuel, Action::DischargeGes, Action::Wait, Action::ChargeGes}) {
      const BandRisk risk = band_risk(ctx, xt, a, model.cons);
      msg << " a=" << to_int(a) << " P(p'>p_hi)=" << risk.above << " P(p'<p_lo)=" << risk.below;
    }
    throw InfeasibilityError(msg.str());
  }
  return f.allowed;
}

double running_cost(const TransitionContext& ctx, const State& x, Action a) {
  const ActionTerms& t = ctx.terms(a);
  double c = t.cost_const + t.cost_f * x.f;
  if (a == Action::DischargeGes) c += t.cost_y.dot(x.y);
  return c;
}

double terminal_cost(double p, double q_m, const CostParams& costs) {
  const double kwh_q = costs.m_q * costs.cp_m / 3.6e6;  // kWh per K
  const double kwh_p = costs.m_p * costs.cp_w / 3.6e6;
  const double dq = q_m - costs.q_ref;
  const double dp = p - costs.p_ref;
  const double neg_q = std::max(-dq, 0.0), pos_q = std::max(dq, 0.0);
  const double neg_p = std::max(-dp, 0.0), pos_p = std::max(dp, 0.0);
  return kwh_q * (costs.xi_pen_q * neg_q - costs.xi_liq_q * pos_q) +
         kwh_p * (costs.xi_pen_p * neg_p - costs.xi_liq_p * pos_p);
}

double terminal_cost(const State& x, const MdpModel& model) {
  return terminal_cost(x.p, model.ges.sys.c_m().dot(x.y), model.costs);
}

Vector storage_state(const mor::GesDynamics& ges, double q) {
  Vector y = mor::uniform_state(ges, q);
  const RowVector cm = ges.sys.c_m();
  y += cm.transpose() * ((q - cm.dot(y)) / cm.squaredNorm());
  return y;
}

std::vector<std::string> check_assumptions(const MdpModel& model, std::uint64_t seed) {
  std::vector<std::string> issues;
  const ConstraintParams& c = model.cons;
  const IesParams& ies = model.ies;
  if (!(c.p_lo < c.p_hi)) issues.push_back("constraints: p_lo must be below p_hi");
  if (!(c.q_lo < c.q_hi)) issues.push_back("constraints: q_lo must be below q_hi");
  if (!(c.r_lo < c.r_hi)) issues.push_back("constraints: r_lo must be below r_hi");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) issues.push_back("constraints: epsilon must lie in (0, 1)");
  if (!(ies.p_in > ies.p_out)) issues.push_back("ies: p_in must exceed p_out");
  if (std::abs(model.demand.beta - ies.gamma) <= 1e-8) {
    issues.push_back("demand.beta and ies.gamma coincide (|beta_R - gamma| <= 1e-8 1/h)");
  }
  for (int n = 0; n < model.horizon; ++n) {
    const double qg = model.qg_at(n);
    if (qg < c.q_lo || qg > c.q_hi) {
      issues.push_back("boundary.q_g outside [q_lo, q_hi] at period " + std::to_string(n));
      break;
    }
  }
  if (!(ies.zeta_f() > ies.zeta_c() * (ies.p_in - ies.p_out))) {
    issues.push_back("ies: fuel heating must exceed heat-pump heating (l_f > l_c (p_in - p_out))");
  }
  if (!issues.empty()) return issues;

  for (Action a : kAllActions) {
    const double abscissa = numerics::spectral_abscissa(numerics::real_schur(mor::action_matrix(model.ges, a)));
    if (!(abscissa < 0.0)) issues.push_back("reduced A(a) unstable for a = " + std::to_string(to_int(a)));
  }
  if (!issues.empty()) return issues;

  const TransitionContext ctx = build_context(model, 0);
  const Vector y_full = storage_state(model.ges, c.q_hi);
  const Vector y_empty = storage_state(model.ges, c.q_lo);
  const auto step_q = [&](const Vector& y, Action a) {
    const ActionTerms& t = ctx.terms(a);
    return ctx.c_m.dot(t.e * y + t.c);
  };
  if (step_q(y_full, Action::DischargeGes) < c.q_lo) {
    issues.push_back("a full GES is emptied within one period of discharging");
  }
  if (step_q(y_empty, Action::ChargeGes) > c.q_hi) {
    issues.push_back("an empty GES is filled within one period of charging");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    State x;
    x.r = c.r_lo + (c.r_hi - c.r_lo) * u01(rng);
    x.p = c.p_lo + (c.p_hi - c.p_lo) * u01(rng);
    x.y = storage_state(model.ges, c.q_lo + (c.q_hi - c.q_lo) * u01(rng));
    const double m2 = ctx.mean_p(x, Action::Fuel);
    const double m1 = ctx.mean_p(x, Action::DischargeGes);
    const double m0 = ctx.mean_p(x, Action::Wait);
    const double mm1 = ctx.mean_p(x, Action::ChargeGes);
    if (!(m2 > m1 && m1 > m0 && m0 > mm1)) {
      issues.push_back("IES transition is not monotone in the action at a sampled state");
      break;
    }
  }
  return issues;
}

}  // namespace geostore::mdp
