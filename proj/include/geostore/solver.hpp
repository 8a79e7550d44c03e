#pragma once

#include "geostore/grid.hpp"
#include "geostore/kernel.hpp"
#include "geostore/mdp.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace geostore::solver {

/// V(n, m) for n = 0..N, row-major in n.
struct ValueTable {
  int horizon = 0;
  std::int64_t points = 0;
  std::vector<double> values;
  std::uint64_t grid_hash = 0;
  std::uint64_t config_hash = 0;

  double at(int n, std::int64_t m) const { return values[static_cast<std::size_t>(n * points + m)]; }
  const double* row(int n) const { return values.data() + static_cast<std::size_t>(n) * points; }
};

/// Minimizing action for n = 0..N-1, plus the exclusion reasons of the
/// feasible set (OR over excluded actions, see mdp::ExclusionReason).
struct PolicyTable {
  int horizon = 0;
  std::int64_t points = 0;
  std::vector<std::int8_t> actions;
  std::vector<std::uint8_t> restricted;
  std::uint64_t grid_hash = 0;
  std::uint64_t config_hash = 0;

  Action at(int n, std::int64_t m) const {
    return action_from_int(actions[static_cast<std::size_t>(n * points + m)]);
  }
};

std::vector<mdp::TransitionContext> build_contexts(const mdp::MdpModel& model);

/// e^{-delta n dt}
double discount(const mdp::MdpModel& model, int n);

struct BellmanPoint {
  double value = 0.0;
  Action action = Action::Wait;
};

/// Two Bellman candidates closer than kTieTolerance times the summed price
/// magnitudes are tied. The threshold scales with the prices and ignores
/// additive shifts of the value, so neither changes the argmin.
inline constexpr double kTieTolerance = 1e-10;
double tie_tolerance(const mdp::CostParams& costs);

/// Minimum over the feasible actions at grid row m of the discounted
/// running cost plus the expected next value. Ties (within tie_tolerance)
/// keep the earlier action of kTieBreakOrder and its value.
BellmanPoint bellman_point(const mdp::MdpModel& model, const grid::StateGrid& grid, const kernel::KernelSet& set,
                           const mdp::TransitionContext& ctx, const double* v_next, std::int64_t m);

/// Expected next value of one action at row m (compensated summation).
double expected_next(const kernel::ActionKernel& k, const grid::StateGrid& grid, const double* v_next,
                     std::int64_t m);

struct Solution {
  ValueTable values;
  PolicyTable policy;
};

Solution solve_bellman(const mdp::MdpModel& model, const grid::StateGrid& grid, const kernel::KernelBundle& bundle,
                       const std::vector<mdp::TransitionContext>& contexts, int threads = 1);

/// Chooses an action at grid row m from its feasible set.
using GridChooser = std::function<Action(int n, std::int64_t m, ActionSet allowed)>;

/// Cost-to-go of a fixed grid policy on the same kernels.
ValueTable evaluate_grid_policy(const mdp::MdpModel& model, const grid::StateGrid& grid,
                                const kernel::KernelBundle& bundle, const std::vector<mdp::TransitionContext>& contexts,
                                const GridChooser& chooser, int threads = 1);

/// First action of kTieBreakOrder contained in `allowed`.
Action first_by_tie_order(ActionSet allowed);

Action policy_lookup(const PolicyTable& policy, const grid::StateGrid& grid, int n, const mdp::State& x);

/// Decision rule on continuous states.
using Controller = std::function<Action(int n, const mdp::State& x)>;

Controller table_controller(const PolicyTable& policy, const grid::StateGrid& grid);
/// Always proposes waiting; the feasibility fallback handles the rest.
Controller wait_controller();
/// One-step lookahead on running cost plus expected terminal cost.
Controller greedy_controller(const mdp::MdpModel& model, const std::vector<mdp::TransitionContext>& contexts);

/// E[terminal cost] of the next state under action a (closed form in the
/// Gaussian p'), undiscounted.
double expected_terminal_next(const mdp::MdpModel& model, const mdp::TransitionContext& ctx, const mdp::State& x,
                              Action a);

struct McResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t fallbacks = 0;  // proposed action infeasible at the realized state
  std::int64_t empty_sets = 0;
  std::vector<double> costs;   // per path
};

McResult evaluate_policy_mc(const mdp::MdpModel& model, const std::vector<mdp::TransitionContext>& contexts,
                            const Controller& controller, const mdp::State& x0, int n_paths, std::uint64_t seed,
                            int threads = 1);

/// Documented binary layout: magic line, JSON header line, then values
/// (double) and actions/restricted (bytes).
void save_tables(const Solution& sol, const std::string& path);
Solution load_tables(const std::string& path);

}  // namespace geostore::solver
