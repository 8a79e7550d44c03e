#pragma once

#include "geostore/solver.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace geostore::sim {

/// One trajectory. Rows n = 0..N; the action and period cost of row N are
/// unused and its cost column holds the discounted terminal cost.
struct ControlledPath {
  std::vector<double> t_h;
  std::vector<double> r_tilde;  // kW
  std::vector<double> p;        // °C
  std::vector<double> q_m;      // °C
  std::vector<double> q_f;      // °C
  std::vector<Action> action;   // size N
  std::vector<double> cost;     // EUR, discounted
  std::vector<double> cum_cost; // EUR
  std::int64_t fallbacks = 0;
  std::int64_t empty_sets = 0;

  double total() const { return cum_cost.empty() ? 0.0 : cum_cost.back(); }
};

/// Noise stream of path `index` under `seed`; three draws per period.
std::vector<std::array<double, 3>> path_noise(int periods, std::uint64_t seed, std::uint64_t index);

ControlledPath simulate_controlled_path(const mdp::MdpModel& model,
                                        const std::vector<mdp::TransitionContext>& contexts,
                                        const solver::Controller& controller, const mdp::State& x0,
                                        std::uint64_t seed, std::uint64_t index = 0);

std::vector<ControlledPath> simulate_paths(const mdp::MdpModel& model,
                                           const std::vector<mdp::TransitionContext>& contexts,
                                           const solver::Controller& controller, const mdp::State& x0, int n_paths,
                                           std::uint64_t seed, int threads = 1);

struct Bands {
  std::vector<double> q05, q50, q95, mean;
};

struct Summary {
  int periods = 0;
  std::vector<std::array<double, 5>> action_freq;  // per period, by action_index
  Bands p, q_m;
  double cost_mean = 0, cost_sd = 0, cost_q05 = 0, cost_q50 = 0, cost_q95 = 0;
  std::vector<double> p_high_violation;  // per period, end-of-period p > p_hi
  std::vector<double> p_low_violation;
};

/// Linear-interpolation quantile of unsorted data.
double quantile(std::vector<double> data, double q);

Summary summarize(const std::vector<ControlledPath>& paths, const mdp::ConstraintParams& cons);

void write_path_csv(const ControlledPath& path, const std::string& file);
void write_paths_csv(const std::vector<ControlledPath>& paths, const std::string& file);
void write_summary_csv(const Summary& summary, double dt, const std::string& file);
void write_cost_summary_csv(const Summary& summary, const std::string& file);

}  // namespace geostore::sim
