#include "geostore/solver.hpp"

#include "geostore/errors.hpp"
#include "geostore/sim.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>

namespace geostore::solver {

std::vector<mdp::TransitionContext> build_contexts(const mdp::MdpModel& model) {
  if (model.horizon < 0) throw DomainError("build_contexts: negative horizon");
  std::vector<mdp::TransitionContext> out;
  out.reserve(static_cast<std::size_t>(model.horizon));
  for (int n = 0; n < model.horizon; ++n) out.push_back(mdp::build_context(model, n));
  return out;
}

double discount(const mdp::MdpModel& model, int n) { return std::exp(-model.costs.delta * n * model.dt); }

double expected_next(const kernel::ActionKernel& k, const grid::StateGrid& grid, const double* v_next,
                     std::int64_t m) {
  const std::int64_t bs = k.block_size;
  const std::int64_t iy = m / grid.block_size();
  const double* v = v_next + static_cast<std::int64_t>(k.y_target[static_cast<std::size_t>(iy)]) * bs;
  const std::span<const double> prob = k.block(m);
  // Kahan summation.
  double sum = 0.0, comp = 0.0;
  for (std::int64_t i = 0; i < bs; ++i) {
    const double term = prob[static_cast<std::size_t>(i)] * v[i] - comp;
    const double t = sum + term;
    comp = (t - sum) - term;
    sum = t;
  }
  return sum;
}

double tie_tolerance(const mdp::CostParams& c) {
  return kTieTolerance * (std::abs(c.xi_f) + std::abs(c.xi_hp) + std::abs(c.xi_p) + std::abs(c.xi_pen_p) +
                          std::abs(c.xi_pen_q) + std::abs(c.xi_liq_p) + std::abs(c.xi_liq_q));
}

BellmanPoint bellman_point(const mdp::MdpModel& model, const grid::StateGrid& grid, const kernel::KernelSet& set,
                           const mdp::TransitionContext& ctx, const double* v_next, std::int64_t m) {
  const ActionSet allowed = set.allowed(m);
  if (allowed.empty()) throw InfeasibilityError("bellman_point: empty feasible set at row " + std::to_string(m));
  const mdp::State x = grid.state(m);
  const double disc = discount(model, ctx.n);
  const double tol = tie_tolerance(model.costs);
  BellmanPoint best;
  best.value = kInf;
  for (Action a : kTieBreakOrder) {
    if (!allowed.contains(a)) continue;
    const double q = disc * mdp::running_cost(ctx, x, a) + expected_next(set.kernel(a), grid, v_next, m);
    if (best.value == kInf || q < best.value - tol) {
      best.value = q;
      best.action = a;
    }
  }
  return best;
}

namespace {

ValueTable terminal_table(const mdp::MdpModel& model, const grid::StateGrid& grid) {
  ValueTable vt;
  vt.horizon = model.horizon;
  vt.points = grid.size();
  vt.grid_hash = grid.hash();
  vt.values.assign(static_cast<std::size_t>((model.horizon + 1) * vt.points), 0.0);
  const double disc = discount(model, model.horizon);
  double* last = vt.values.data() + static_cast<std::size_t>(model.horizon) * vt.points;
  for (std::int64_t m = 0; m < vt.points; ++m) last[m] = disc * mdp::terminal_cost(grid.state(m), model);
  return vt;
}

void check_inputs(const mdp::MdpModel& model, const grid::StateGrid& grid, const kernel::KernelBundle& bundle,
                  const std::vector<mdp::TransitionContext>& contexts) {
  if (static_cast<int>(contexts.size()) != model.horizon ||
      static_cast<int>(bundle.period_set.size()) != model.horizon) {
    throw DimensionError("solver: need one context and one kernel set per period");
  }
  for (const kernel::KernelSet& s : bundle.sets) {
    if (s.grid_hash != grid.hash()) throw DomainError("solver: kernels were built on another grid");
  }
}

}  // namespace

Solution solve_bellman(const mdp::MdpModel& model, const grid::StateGrid& grid, const kernel::KernelBundle& bundle,
                       const std::vector<mdp::TransitionContext>& contexts, int threads) {
  check_inputs(model, grid, bundle, contexts);
  Solution sol;
  sol.values = terminal_table(model, grid);
  PolicyTable& pol = sol.policy;
  pol.horizon = model.horizon;
  pol.points = grid.size();
  pol.grid_hash = grid.hash();
  pol.actions.assign(static_cast<std::size_t>(model.horizon * pol.points), 0);
  pol.restricted.assign(pol.actions.size(), 0);

  for (int n = model.horizon - 1; n >= 0; --n) {
    const kernel::KernelSet& set = bundle.for_period(n);
    const double* v_next = sol.values.row(n + 1);
    double* v_now = sol.values.values.data() + static_cast<std::size_t>(n) * pol.points;
    std::int8_t* a_now = pol.actions.data() + static_cast<std::size_t>(n) * pol.points;
    std::uint8_t* r_now = pol.restricted.data() + static_cast<std::size_t>(n) * pol.points;
    numerics::parallel_for(static_cast<std::size_t>(pol.points), threads, [&](std::size_t i) {
      const auto m = static_cast<std::int64_t>(i);
      const BellmanPoint bp = bellman_point(model, grid, set, contexts[static_cast<std::size_t>(n)], v_next, m);
      v_now[m] = bp.value;
      a_now[m] = static_cast<std::int8_t>(to_int(bp.action));
      std::uint8_t why = 0;
      for (std::size_t k = 0; k < 5; ++k) why |= set.mask.reasons[i * 5 + k];
      r_now[m] = why;
    });
  }
  return sol;
}

ValueTable evaluate_grid_policy(const mdp::MdpModel& model, const grid::StateGrid& grid,
                                const kernel::KernelBundle& bundle, const std::vector<mdp::TransitionContext>& contexts,
                                const GridChooser& chooser, int threads) {
  check_inputs(model, grid, bundle, contexts);
  ValueTable vt = terminal_table(model, grid);
  for (int n = model.horizon - 1; n >= 0; --n) {
    const kernel::KernelSet& set = bundle.for_period(n);
    const mdp::TransitionContext& ctx = contexts[static_cast<std::size_t>(n)];
    const double* v_next = vt.row(n + 1);
    double* v_now = vt.values.data() + static_cast<std::size_t>(n) * vt.points;
    const double disc = discount(model, n);
    numerics::parallel_for(static_cast<std::size_t>(vt.points), threads, [&](std::size_t i) {
      const auto m = static_cast<std::int64_t>(i);
      const ActionSet allowed = set.allowed(m);
      const Action a = chooser(n, m, allowed);
      if (!allowed.contains(a)) throw InfeasibilityError("evaluate_grid_policy: chooser returned an infeasible action");
      v_now[m] = disc * mdp::running_cost(ctx, grid.state(m), a) + expected_next(set.kernel(a), grid, v_next, m);
    });
  }
  return vt;
}

Action first_by_tie_order(ActionSet allowed) {
  for (Action a : kTieBreakOrder) {
    if (allowed.contains(a)) return a;
  }
  throw InfeasibilityError("first_by_tie_order: empty action set");
}

Action policy_lookup(const PolicyTable& policy, const grid::StateGrid& grid, int n, const mdp::State& x) {
  if (n < 0 || n >= policy.horizon) throw DomainError("policy_lookup: period out of range");
  return policy.at(n, grid.project(x).index);
}

Controller table_controller(const PolicyTable& policy, const grid::StateGrid& grid) {
  return [&policy, &grid](int n, const mdp::State& x) { return policy_lookup(policy, grid, n, x); };
}

Controller wait_controller() {
  return [](int, const mdp::State&) { return Action::Wait; };
}

double expected_terminal_next(const mdp::MdpModel& model, const mdp::TransitionContext& ctx, const mdp::State& x,
                              Action a) {
  const mdp::CostParams& c = model.costs;
  const mdp::ActionTerms& t = ctx.terms(a);
  const double q_next = ctx.c_m.dot(t.e * x.y + t.c);
  const double q_part = mdp::terminal_cost(c.p_ref, q_next, c);
  const double mean = ctx.mean_p(x, a);
  const double sd = t.sigma_p;
  double short_fall = 0.0;  // E[(p_ref - p')^+]
  if (sd > 0.0) {
    const double z = (c.p_ref - mean) / sd;
    short_fall = (c.p_ref - mean) * numerics::std_normal_cdf(z) + sd * numerics::std_normal_pdf(z);
  } else {
    short_fall = std::max(c.p_ref - mean, 0.0);
  }
  const double excess = short_fall - (c.p_ref - mean);  // E[(p' - p_ref)^+]
  const double kwh_p = c.m_p * c.cp_w / 3.6e6;
  return q_part + kwh_p * (c.xi_pen_p * short_fall - c.xi_liq_p * excess);
}

Controller greedy_controller(const mdp::MdpModel& model, const std::vector<mdp::TransitionContext>& contexts) {
  return [&model, &contexts](int n, const mdp::State& x) {
    const mdp::TransitionContext& ctx = contexts[static_cast<std::size_t>(n)];
    const ActionSet allowed = mdp::feasibility(ctx, x, model).allowed;
    if (allowed.empty()) return Action::Wait;
    Action best = Action::Wait;
    double best_cost = kInf;
    for (Action a : kTieBreakOrder) {
      if (!allowed.contains(a)) continue;
      const double v = discount(model, n) * mdp::running_cost(ctx, x, a) +
                       discount(model, n + 1) * expected_terminal_next(model, ctx, x, a);
      if (v < best_cost) {
        best_cost = v;
        best = a;
      }
    }
    return best;
  };
}

McResult evaluate_policy_mc(const mdp::MdpModel& model, const std::vector<mdp::TransitionContext>& contexts,
                            const Controller& controller, const mdp::State& x0, int n_paths, std::uint64_t seed,
                            int threads) {
  if (n_paths < 2) throw DomainError("evaluate_policy_mc: need at least two paths");
  const std::vector<sim::ControlledPath> paths =
      sim::simulate_paths(model, contexts, controller, x0, n_paths, seed, threads);
  McResult res;
  res.costs.reserve(paths.size());
  for (const sim::ControlledPath& p : paths) {
    res.costs.push_back(p.total());
    res.fallbacks += p.fallbacks;
    res.empty_sets += p.empty_sets;
  }
  double mean = 0.0;
  for (double c : res.costs) mean += c;
  mean /= n_paths;
  double ss = 0.0;
  for (double c : res.costs) ss += (c - mean) * (c - mean);
  res.mean = mean;
  res.std_error = std::sqrt(ss / (n_paths - 1) / n_paths);
  return res;
}

namespace {
constexpr const char* kTablesMagic = "geostore-tables-v1";
}

void save_tables(const Solution& sol, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  nlohmann::json h;
  h["horizon"] = sol.values.horizon;
  h["points"] = sol.values.points;
  h["grid_hash"] = sol.values.grid_hash;
  h["config_hash"] = sol.values.config_hash;
  out << kTablesMagic << '\n' << h.dump() << '\n';
  out.write(reinterpret_cast<const char*>(sol.values.values.data()),
            static_cast<std::streamsize>(sol.values.values.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(sol.policy.actions.data()),
            static_cast<std::streamsize>(sol.policy.actions.size()));
  out.write(reinterpret_cast<const char*>(sol.policy.restricted.data()),
            static_cast<std::streamsize>(sol.policy.restricted.size()));
  if (!out) throw IoError("write failed: " + path);
}

Solution load_tables(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string magic, line;
  std::getline(in, magic);
  if (magic != kTablesMagic) throw IoError(path + ": not a tables file");
  std::getline(in, line);
  const nlohmann::json h = nlohmann::json::parse(line);
  Solution sol;
  ValueTable& v = sol.values;
  PolicyTable& p = sol.policy;
  v.horizon = p.horizon = h.at("horizon").get<int>();
  v.points = p.points = h.at("points").get<std::int64_t>();
  v.grid_hash = p.grid_hash = h.at("grid_hash").get<std::uint64_t>();
  v.config_hash = p.config_hash = h.at("config_hash").get<std::uint64_t>();
  v.values.resize(static_cast<std::size_t>((v.horizon + 1) * v.points));
  p.actions.resize(static_cast<std::size_t>(p.horizon * p.points));
  p.restricted.resize(p.actions.size());
  in.read(reinterpret_cast<char*>(v.values.data()), static_cast<std::streamsize>(v.values.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(p.actions.data()), static_cast<std::streamsize>(p.actions.size()));
  in.read(reinterpret_cast<char*>(p.restricted.data()), static_cast<std::streamsize>(p.restricted.size()));
  if (!in) throw IoError(path + ": truncated tables file");
  return sol;
}

}  // namespace geostore::solver
