#include "geostore/sim.hpp"

#include "geostore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

namespace geostore::sim {

std::vector<std::array<double, 3>> path_noise(int periods, std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::array<double, 3>> out(static_cast<std::size_t>(periods));
  for (auto& b : out) {
    for (double& v : b) v = normal(rng);
  }
  return out;
}

ControlledPath simulate_controlled_path(const mdp::MdpModel& model,
                                        const std::vector<mdp::TransitionContext>& contexts,
                                        const solver::Controller& controller, const mdp::State& x0,
                                        std::uint64_t seed, std::uint64_t index) {
  if (!std::isfinite(x0.r) || !std::isfinite(x0.p) || !x0.y.allFinite()) {
    throw DomainError("simulate_controlled_path: non-finite start state");
  }
  const int horizon = model.horizon;
  const auto noise = path_noise(horizon, seed, index);
  const RowVector cm = model.ges.sys.c_m();
  const RowVector cf = model.ges.sys.c_f();

  ControlledPath path;
  auto record = [&](int n, const mdp::State& x) {
    path.t_h.push_back(model.t_at(n));
    path.r_tilde.push_back(processes::seasonality_eval(model.demand_season, model.t_at(n)) + x.r);
    path.p.push_back(x.p);
    path.q_m.push_back(cm.dot(x.y));
    path.q_f.push_back(cf.dot(x.y));
  };

  mdp::State x = x0;
  double cum = 0.0;
  for (int n = 0; n < horizon; ++n) {
    record(n, x);
    const mdp::TransitionContext& ctx = contexts[static_cast<std::size_t>(n)];
    const ActionSet allowed = mdp::feasibility(ctx, x, model).allowed;
    Action a = controller(n, x);
    if (allowed.empty()) {
      ++path.empty_sets;
    } else if (!allowed.contains(a)) {
      ++path.fallbacks;
      a = solver::first_by_tie_order(allowed);
    }
    const double c = solver::discount(model, n) * mdp::running_cost(ctx, x, a);
    cum += c;
    path.action.push_back(a);
    path.cost.push_back(c);
    path.cum_cost.push_back(cum);
    x = mdp::transition(ctx, x, a, noise[static_cast<std::size_t>(n)]);
  }
  record(horizon, x);
  const double terminal = solver::discount(model, horizon) * mdp::terminal_cost(x, model);
  cum += terminal;
  path.cost.push_back(terminal);
  path.cum_cost.push_back(cum);
  return path;
}

std::vector<ControlledPath> simulate_paths(const mdp::MdpModel& model,
                                           const std::vector<mdp::TransitionContext>& contexts,
                                           const solver::Controller& controller, const mdp::State& x0, int n_paths,
                                           std::uint64_t seed, int threads) {
  std::vector<ControlledPath> paths(static_cast<std::size_t>(std::max(n_paths, 0)));
  numerics::parallel_for(paths.size(), threads, [&](std::size_t i) {
    paths[i] = simulate_controlled_path(model, contexts, controller, x0, seed, i);
  });
  return paths;
}

double quantile(std::vector<double> data, double q) {
  if (data.empty()) throw DomainError("quantile: empty data");
  std::sort(data.begin(), data.end());
  const double pos = q * static_cast<double>(data.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, data.size() - 1);
  return data[lo] + (pos - static_cast<double>(lo)) * (data[hi] - data[lo]);
}

namespace {

Bands bands_of(const std::vector<ControlledPath>& paths, const std::vector<double> ControlledPath::*field) {
  Bands b;
  const std::size_t rows = (paths.front().*field).size();
  std::vector<double> column(paths.size());
  for (std::size_t n = 0; n < rows; ++n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      column[i] = (paths[i].*field)[n];
      sum += column[i];
    }
    b.mean.push_back(sum / static_cast<double>(paths.size()));
    b.q05.push_back(quantile(column, 0.05));
    b.q50.push_back(quantile(column, 0.50));
    b.q95.push_back(quantile(column, 0.95));
  }
  return b;
}

}  // namespace

Summary summarize(const std::vector<ControlledPath>& paths, const mdp::ConstraintParams& cons) {
  if (paths.empty()) throw DomainError("summarize: no paths");
  Summary s;
  s.periods = static_cast<int>(paths.front().action.size());
  const auto count = static_cast<double>(paths.size());
  s.action_freq.assign(static_cast<std::size_t>(s.periods), {});
  s.p_high_violation.assign(static_cast<std::size_t>(s.periods), 0.0);
  s.p_low_violation.assign(static_cast<std::size_t>(s.periods), 0.0);
  for (const ControlledPath& path : paths) {
    for (int n = 0; n < s.periods; ++n) {
      const auto k = static_cast<std::size_t>(n);
      s.action_freq[k][static_cast<std::size_t>(action_index(path.action[k]))] += 1.0 / count;
      if (path.p[k + 1] > cons.p_hi) s.p_high_violation[k] += 1.0 / count;
      if (path.p[k + 1] < cons.p_lo) s.p_low_violation[k] += 1.0 / count;
    }
  }
  s.p = bands_of(paths, &ControlledPath::p);
  s.q_m = bands_of(paths, &ControlledPath::q_m);
  std::vector<double> totals;
  for (const ControlledPath& path : paths) totals.push_back(path.total());
  double mean = 0.0;
  for (double t : totals) mean += t;
  mean /= count;
  double ss = 0.0;
  for (double t : totals) ss += (t - mean) * (t - mean);
  s.cost_mean = mean;
  s.cost_sd = paths.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
  s.cost_q05 = quantile(totals, 0.05);
  s.cost_q50 = quantile(totals, 0.50);
  s.cost_q95 = quantile(totals, 0.95);
  return s;
}

namespace {

constexpr const char* kPathHeader = "t_h,r_tilde_kw,p_c,qM_c,qF_c,action,cost_eur,cum_cost_eur";

void write_rows(std::ostream& out, const ControlledPath& path, const std::string& prefix) {
  for (std::size_t n = 0; n < path.t_h.size(); ++n) {
    out << prefix << path.t_h[n] << ',' << path.r_tilde[n] << ',' << path.p[n] << ',' << path.q_m[n] << ','
        << path.q_f[n] << ',';
    if (n < path.action.size()) out << to_int(path.action[n]);
    out << ',' << path.cost[n] << ',' << path.cum_cost[n] << '\n';
  }
}

std::ofstream open_csv(const std::string& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file);
  out << std::setprecision(10);
  return out;
}

}  // namespace

void write_path_csv(const ControlledPath& path, const std::string& file) {
  std::ofstream out = open_csv(file);
  out << kPathHeader << '\n';
  write_rows(out, path, "");
}

void write_paths_csv(const std::vector<ControlledPath>& paths, const std::string& file) {
  std::ofstream out = open_csv(file);
  out << "path," << kPathHeader << '\n';
  for (std::size_t i = 0; i < paths.size(); ++i) write_rows(out, paths[i], std::to_string(i) + ",");
}

void write_summary_csv(const Summary& s, double dt, const std::string& file) {
  std::ofstream out = open_csv(file);
  out << "t_h,freq_a_m2,freq_a_m1,freq_a_0,freq_a_p1,freq_a_p2,p_mean_c,p_q05_c,p_q50_c,p_q95_c,"
         "qM_mean_c,qM_q05_c,qM_q50_c,qM_q95_c,viol_p_high_frac,viol_p_low_frac\n";
  for (int n = 0; n <= s.periods; ++n) {
    const auto k = static_cast<std::size_t>(n);
    out << n * dt;
    for (std::size_t a = 0; a < 5; ++a) {
      out << ',';
      if (n < s.periods) out << s.action_freq[k][a];
    }
    out << ',' << s.p.mean[k] << ',' << s.p.q05[k] << ',' << s.p.q50[k] << ',' << s.p.q95[k] << ',' << s.q_m.mean[k]
        << ',' << s.q_m.q05[k] << ',' << s.q_m.q50[k] << ',' << s.q_m.q95[k] << ',';
    if (n < s.periods) out << s.p_high_violation[k];
    out << ',';
    if (n < s.periods) out << s.p_low_violation[k];
    out << '\n';
  }
}

void write_cost_summary_csv(const Summary& s, const std::string& file) {
  std::ofstream out = open_csv(file);
  out << "statistic,value_eur\n"
      << "mean," << s.cost_mean << "\nsd," << s.cost_sd << "\nq05," << s.cost_q05 << "\nq50," << s.cost_q50
      << "\nq95," << s.cost_q95 << '\n';
}

}  // namespace geostore::sim
