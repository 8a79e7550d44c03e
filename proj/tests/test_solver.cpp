#include "doctest.h"

#include "fixtures.hpp"

#include "geostore/errors.hpp"
#include "geostore/solver.hpp"
#include "geostore/validation.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace geostore;
using namespace geostore::solver;

namespace {

struct Solved {
  fixtures::Problem problem;
  Solution solution;
};

const Solved& paper() {
  static const Solved s = [] {
    Solved out;
    out.problem = fixtures::make_problem(fixtures::paper_model());
    const auto& p = out.problem;
    out.solution = solve_bellman(p.model, p.grid, p.bundle, p.contexts, 2);
    return out;
  }();
  return s;
}

mdp::MdpModel zero_cost(mdp::MdpModel m) {
  m.costs.xi_f = m.costs.xi_hp = m.costs.xi_p = 0.0;
  m.costs.xi_pen_p = m.costs.xi_pen_q = 0.0;
  m.costs.xi_liq_p = m.costs.xi_liq_q = 0.0;
  return m;
}

// Backward recursion with the library's Bellman step on a given terminal row.
ValueTable recurse(const fixtures::Problem& p, std::vector<double> terminal, PolicyTable* policy) {
  ValueTable vt;
  vt.horizon = p.model.horizon;
  vt.points = p.grid.size();
  vt.values.assign(static_cast<std::size_t>((vt.horizon + 1) * vt.points), 0.0);
  std::copy(terminal.begin(), terminal.end(), vt.values.begin() + vt.horizon * vt.points);
  policy->horizon = vt.horizon;
  policy->points = vt.points;
  policy->actions.assign(static_cast<std::size_t>(vt.horizon * vt.points), 0);
  for (int n = vt.horizon - 1; n >= 0; --n) {
    for (std::int64_t m = 0; m < vt.points; ++m) {
      const BellmanPoint bp =
          bellman_point(p.model, p.grid, p.bundle.for_period(n), p.contexts[static_cast<std::size_t>(n)],
                        vt.row(n + 1), m);
      vt.values[static_cast<std::size_t>(n * vt.points + m)] = bp.value;
      policy->actions[static_cast<std::size_t>(n * vt.points + m)] = static_cast<std::int8_t>(to_int(bp.action));
    }
  }
  return vt;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("empty horizon returns the terminal costs") {
    mdp::MdpModel m = fixtures::paper_model();
    m.horizon = 0;
    const fixtures::Problem p = fixtures::make_problem(m);
    const Solution s = solve_bellman(p.model, p.grid, p.bundle, p.contexts);
    CHECK(s.values.horizon == 0);
    CHECK(s.policy.actions.empty());
    for (std::int64_t k = 0; k < p.grid.size(); ++k) {
      CHECK(s.values.at(0, k) == mdp::terminal_cost(p.grid.state(k), p.model));
    }
  }

  TEST_CASE("zero-cost model has zero value and waits wherever it may") {
    const fixtures::Problem p = fixtures::make_problem(zero_cost(fixtures::paper_model()));
    const Solution s = solve_bellman(p.model, p.grid, p.bundle, p.contexts);
    for (double v : s.values.values) CHECK(v == 0.0);
    for (int n = 0; n < p.model.horizon; ++n) {
      const auto& set = p.bundle.for_period(n);
      for (std::int64_t k = 0; k < p.grid.size(); ++k) CHECK(s.policy.at(n, k) == first_by_tie_order(set.allowed(k)));
    }
    const auto mc = evaluate_policy_mc(p.model, p.contexts, table_controller(s.policy, p.grid),
                                       config::start_state(fixtures::coarse_config(), p.model.ges), 50, 3);
    CHECK(mc.mean == 0.0);
    CHECK(mc.std_error == 0.0);
  }

  TEST_CASE("terminal row, feasibility and Bellman residual") {
    const auto& s = paper();
    const auto& p = s.problem;
    CHECK(validation::terminal_values(p.model, p.grid, s.solution.values).passed);
    CHECK(validation::values_finite(s.solution.values).passed);
    CHECK(validation::policy_feasible(p.grid, p.bundle, s.solution.policy).passed);
    const auto res = validation::bellman_residual(p.model, p.grid, p.bundle, p.contexts, s.solution, 200, 5);
    INFO(res.detail);
    CHECK(res.passed);
  }

  TEST_CASE("solution does not depend on the thread count") {
    const auto& s = paper();
    const auto& p = s.problem;
    const Solution one = solve_bellman(p.model, p.grid, p.bundle, p.contexts, 1);
    CHECK(one.values.values == s.solution.values.values);
    CHECK(one.policy.actions == s.solution.policy.actions);
  }

  TEST_CASE("scaling every price scales the value") {
    const auto& s = paper();
    mdp::MdpModel m = s.problem.model;
    const double lambda = 7.0;
    for (double* x : {&m.costs.xi_f, &m.costs.xi_hp, &m.costs.xi_p, &m.costs.xi_pen_p, &m.costs.xi_pen_q,
                      &m.costs.xi_liq_p, &m.costs.xi_liq_q}) {
      *x *= lambda;
    }
    fixtures::Problem scaled = s.problem;
    scaled.model = m;
    scaled.contexts = build_contexts(m);
    const Solution t = solve_bellman(scaled.model, scaled.grid, scaled.bundle, scaled.contexts);
    double worst = 0.0;
    for (std::size_t i = 0; i < t.values.values.size(); ++i) {
      const double v = s.solution.values.values[i];
      worst = std::max(worst, std::abs(t.values.values[i] - lambda * v) / std::max(1.0, std::abs(lambda * v)));
    }
    CHECK(worst <= 1e-10);
    CHECK(t.policy.actions == s.solution.policy.actions);
  }

  TEST_CASE("adding a constant to the terminal cost shifts every value") {
    const auto& s = paper();
    const auto& p = s.problem;
    std::vector<double> term(s.solution.values.row(p.model.horizon),
                             s.solution.values.row(p.model.horizon) + p.grid.size());
    PolicyTable base_policy, shifted_policy;
    const ValueTable base = recurse(p, term, &base_policy);
    CHECK(base.values == s.solution.values.values);
    for (double& v : term) v += 100.0;
    const ValueTable shifted = recurse(p, term, &shifted_policy);
    double worst = 0.0;
    for (std::size_t i = 0; i < base.values.size(); ++i) {
      worst = std::max(worst, std::abs(shifted.values[i] - base.values[i] - 100.0));
    }
    CHECK(worst <= 1e-9);
    CHECK(shifted_policy.actions == base_policy.actions);
  }

  TEST_CASE("optimal value never exceeds the wait-where-feasible cost") {
    const auto& s = paper();
    const auto& p = s.problem;
    const ValueTable wait = evaluate_grid_policy(p.model, p.grid, p.bundle, p.contexts,
                                                 [](int, std::int64_t, ActionSet k) { return first_by_tie_order(k); });
    for (std::size_t i = 0; i < wait.values.size(); ++i) CHECK(s.solution.values.values[i] <= wait.values[i] + 1e-9);
    // Evaluating the optimal policy itself reproduces the value.
    const ValueTable self = evaluate_grid_policy(
        p.model, p.grid, p.bundle, p.contexts,
        [&](int n, std::int64_t m, ActionSet) { return s.solution.policy.at(n, m); });
    CHECK(self.values == s.solution.values.values);
  }

  TEST_CASE("discounting") {
    mdp::MdpModel m = fixtures::paper_model();
    CHECK(discount(m, 5) == 1.0);
    m.costs.delta = 0.05;
    CHECK(discount(m, 4) == doctest::Approx(std::exp(-0.2)).epsilon(1e-15));
  }

  TEST_CASE("policy lookup") {
    const auto& s = paper();
    const auto& p = s.problem;
    for (std::int64_t k = 0; k < p.grid.size(); k += 11) {
      CHECK(policy_lookup(s.solution.policy, p.grid, 3, p.grid.state(k)) == s.solution.policy.at(3, k));
    }
    mdp::State x = p.grid.state(5);
    const double p_top = p.grid.p().points().back();
    x.p = p_top + 40.0;
    mdp::State edge = x;
    edge.p = p_top;
    CHECK(policy_lookup(s.solution.policy, p.grid, 0, x) == policy_lookup(s.solution.policy, p.grid, 0, edge));
    const auto pr = p.grid.project(x);
    CHECK(policy_lookup(s.solution.policy, p.grid, 0, pr.point) == policy_lookup(s.solution.policy, p.grid, 0, x));
    CHECK_THROWS_AS(policy_lookup(s.solution.policy, p.grid, p.model.horizon, x), DomainError);
  }

  TEST_CASE("tie order") {
    CHECK(first_by_tie_order(ActionSet::all()) == Action::Wait);
    ActionSet k;
    k.insert(Action::ChargeGes);
    k.insert(Action::DischargeGes);
    CHECK(first_by_tie_order(k) == Action::ChargeGes);
    k = ActionSet();
    k.insert(Action::OverSpill);
    k.insert(Action::Fuel);
    CHECK(first_by_tie_order(k) == Action::OverSpill);
    CHECK_THROWS_AS(first_by_tie_order(ActionSet()), InfeasibilityError);
  }

  TEST_CASE("Monte Carlo cost of the optimal policy is consistent with its value") {
    const auto& s = paper();
    const auto& p = s.problem;
    const std::int64_t m0 = p.grid.flat(p.grid.r().size() / 2, p.grid.p().size() / 2, p.grid.y_size() / 2);
    const mdp::State x0 = p.grid.state(m0);
    const auto mc = evaluate_policy_mc(p.model, p.contexts, table_controller(s.solution.policy, p.grid), x0, 400, 17, 2);
    CHECK(mc.std_error > 0.0);
    CHECK(mc.costs.size() == 400);
    MESSAGE("V(0, x0) = " << s.solution.values.at(0, m0) << ", MC " << mc.mean << " +- " << mc.std_error
                          << ", fallbacks " << mc.fallbacks);
    CHECK(mc.mean >= s.solution.values.at(0, m0) - 3 * mc.std_error - 0.25 * std::abs(s.solution.values.at(0, m0)));
    CHECK_THROWS_AS(evaluate_policy_mc(p.model, p.contexts, wait_controller(), x0, 1, 1), DomainError);
  }

  TEST_CASE("greedy lookahead uses the closed-form expected terminal cost") {
    const auto& p = paper().problem;
    const auto& ctx = p.contexts[0];
    mdp::State x = p.grid.state(p.grid.size() / 2);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    for (Action a : {Action::Fuel, Action::Wait}) {
      double sum = 0.0;
      const int n = 200000;
      for (int i = 0; i < n; ++i) sum += mdp::terminal_cost(mdp::transition(ctx, x, a, {nd(rng), nd(rng), nd(rng)}), p.model);
      const double closed = expected_terminal_next(p.model, ctx, x, a);
      CHECK(std::abs(sum / n - closed) <= 0.01 * std::max(1.0, closed));
    }
  }

  TEST_CASE("tables round-trip through their file") {
    const auto& s = paper();
    Solution sol = s.solution;
    sol.values.config_hash = sol.policy.config_hash = 0xabcdef;
    const auto path = std::filesystem::temp_directory_path() / "geostore_tables_test.bin";
    save_tables(sol, path.string());
    const Solution back = load_tables(path.string());
    CHECK(back.values.values == sol.values.values);
    CHECK(back.policy.actions == sol.policy.actions);
    CHECK(back.policy.restricted == sol.policy.restricted);
    CHECK(back.values.grid_hash == sol.values.grid_hash);
    CHECK(back.values.config_hash == 0xabcdef);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 10);
    CHECK_THROWS_AS(load_tables(path.string()), IoError);
    std::filesystem::remove(path);
  }

  TEST_CASE("solver rejects kernels of another grid") {
    const auto& p = paper().problem;
    fixtures::Problem other = p;
    other.bundle.sets[0].grid_hash ^= 1;
    CHECK_THROWS_AS(solve_bellman(other.model, other.grid, other.bundle, other.contexts), DomainError);
  }
}
