#include "geostore/pipeline.hpp"

#include "geostore/errors.hpp"
#include "geostore/kernel.hpp"
#include "geostore/mor.hpp"
#include "geostore/sim.hpp"
#include "geostore/validation.hpp"

#include "json.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace geostore::pipeline {

namespace fs = std::filesystem;
using config::Stage;

namespace {

constexpr Stage kOrder[] = {Stage::Assemble, Stage::Reduce, Stage::Kernel,
                            Stage::Solve,    Stage::Simulate, Stage::Validate};

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

class NullBuffer : public std::streambuf {
 protected:
  int overflow(int c) override { return c; }
};

struct Run {
  Run(const config::ExperimentConfig& c, const Options& o, std::ostream& l, fs::path d)
      : cfg(c), opts(o), log(l), dir(std::move(d)) {}

  const config::ExperimentConfig& cfg;
  const Options& opts;
  std::ostream& log;
  fs::path dir;
  std::map<std::string, ManifestEntry> manifest;
  std::map<int, std::uint64_t> outputs;  // by stage index

  std::optional<ges::FullOrderSystem> full;
  std::optional<mor::GesDynamics> ges;
  std::optional<mdp::MdpModel> model;
  std::vector<mdp::TransitionContext> contexts;
  std::optional<grid::StateGrid> grid;
  std::optional<kernel::KernelBundle> bundle;
  std::optional<solver::Solution> solution;
  std::optional<sim::Summary> summary;

  std::string file(const std::string& name) const { return (dir / name).string(); }

  std::vector<std::string> output_files(Stage s) const {
    std::vector<std::string> out;
    for (const std::string& f : stage_outputs(s)) out.push_back(file(f));
    return out;
  }

  std::uint64_t input_hash(Stage s) const {
    std::vector<std::string> sections;
    std::string upstream;
    for (Stage t : kOrder) {
      for (const std::string& sec : config::stage_sections(t)) sections.push_back(sec);
      if (t == s) break;
      upstream += hex(outputs.at(static_cast<int>(t))) + "\n";
    }
    return config::fnv1a(std::string(config::stage_name(s)) + "\n" + config::dump_sections(cfg, sections) + upstream);
  }

  bool cache_valid(Stage s, std::uint64_t input) const {
    if (opts.force || s == Stage::Validate) return false;
    auto it = manifest.find(config::stage_name(s));
    if (it == manifest.end()) return false;
    if (it->second.input_hash != input) {
      log << config::stage_name(s) << ": cached artifacts are stale (input hash " << hex(it->second.input_hash)
          << " != " << hex(input) << "), rebuilding\n";
      return false;
    }
    for (const std::string& f : output_files(s)) {
      if (!fs::exists(f)) return false;
    }
    if (hash_files(output_files(s)) != it->second.output_hash) {
      log << config::stage_name(s) << ": outputs changed on disk since they were recorded, rebuilding\n";
      return false;
    }
    return true;
  }

  // Lazy in-memory products, rebuilt or loaded as later stages need them.
  const ges::FullOrderSystem& need_full() {
    if (!full) full = ges::assemble_full_order(cfg.geometry, cfg.materials, cfg.boundary, cfg.hx, cfg.hy);
    return *full;
  }
  const mor::GesDynamics& need_ges() {
    if (!ges) ges = mor::load_reduced(file("reduced.json"));
    return *ges;
  }
  const mdp::MdpModel& need_model() {
    if (!model) {
      model = config::build_model(cfg, need_ges());
      contexts = solver::build_contexts(*model);
    }
    return *model;
  }
  const grid::StateGrid& need_grid() {
    if (!grid) grid = load_grid(file("grid.json"));
    return *grid;
  }
  const kernel::KernelBundle& need_bundle() {
    if (!bundle) bundle = kernel::load_bundle(file("kernels.bin"));
    return *bundle;
  }
  const solver::Solution& need_solution() {
    if (!solution) solution = solver::load_tables(file("tables.bin"));
    return *solution;
  }

  void build(Stage s, Result& result) {
    switch (s) {
      case Stage::Assemble: {
        const ges::FullOrderSystem& f = need_full();
        log << "assemble: n = " << f.n << " (" << f.nx << " x " << f.ny << ")\n";
        ges::write_triplets(f, file("full_order.txt"));
        break;
      }
      case Stage::Reduce: {
        mor::ReducedSystem red =
            mor::align_qm_coordinate(mor::balanced_truncation(need_full(), cfg.reduction.ell, config::bt_options(cfg)));
        mor::GesDynamics g;
        g.sys = red;
        g.q_in_charge = cfg.boundary.q_in_charge;
        g.dt_hp = cfg.boundary.dt_hp;
        g.outlet_mode = cfg.reduction.outlet_mode;
        log << "reduce: ell = " << red.ell << ", leading Hankel values";
        for (int i = 0; i < std::min<int>(6, static_cast<int>(red.hankel_sv.size())); ++i) log << ' ' << red.hankel_sv(i);
        log << '\n';
        mor::save_reduced(g, file("reduced.json"));
        ges = g;
        break;
      }
      case Stage::Kernel: {
        const mdp::MdpModel& m = need_model();
        for (const std::string& w : mdp::check_assumptions(m)) log << "kernel: assumption warning: " << w << '\n';
        const grid::Envelope env = grid::simulate_envelope(m, cfg.grid.envelope_periods, cfg.grid.envelope_seed);
        grid = grid::build_axes(m, cfg.grid.counts, env, cfg.grid.pad);
        save_grid(*grid, file("grid.json"));
        kernel::KernelOptions ko;
        ko.psi_quantum = cfg.psi_quantum;
        ko.threads = opts.threads;
        bundle = kernel::build_kernel_bundle(m, contexts, *grid, ko);
        log << "kernel: " << grid->size() << " grid points, " << bundle->sets.size() << " distinct period set(s)\n";
        kernel::save_bundle(*bundle, file("kernels.bin"));
        break;
      }
      case Stage::Solve: {
        solution = solver::solve_bellman(need_model(), need_grid(), need_bundle(), contexts, opts.threads);
        solution->values.config_hash = input_hash(Stage::Solve);
        solution->policy.config_hash = solution->values.config_hash;
        solver::save_tables(*solution, file("tables.bin"));
        break;
      }
      case Stage::Simulate: {
        simulate_paths_now(true);
        break;
      }
      case Stage::Validate: {
        validate(result);
        break;
      }
    }
  }

  std::vector<sim::ControlledPath> simulate_paths_now(bool write) {
    const mdp::MdpModel& m = need_model();
    const grid::StateGrid& g = need_grid();
    const solver::Solution& sol = need_solution();
    const mdp::State x0 = config::start_state(cfg, m.ges);
    auto paths = sim::simulate_paths(m, contexts, solver::table_controller(sol.policy, g), x0, cfg.simulation.n_paths,
                                     cfg.simulation.seed, opts.threads);
    summary = sim::summarize(paths, m.cons);
    if (write) {
      sim::write_paths_csv(paths, file("paths.csv"));
      sim::write_summary_csv(*summary, m.dt, file("summary.csv"));
      sim::write_cost_summary_csv(*summary, file("cost_summary.csv"));
      std::int64_t fallbacks = 0;
      for (const auto& p : paths) fallbacks += p.fallbacks;
      log << "simulate: " << paths.size() << " paths, mean cost " << summary->cost_mean << " EUR, " << fallbacks
          << " projection fallbacks\n";
    }
    return paths;
  }

  void validate(Result& result) {
    const mdp::MdpModel& m = need_model();
    const grid::StateGrid& g = need_grid();
    const kernel::KernelBundle& b = need_bundle();
    const solver::Solution& sol = need_solution();
    if (!summary) simulate_paths_now(false);
    std::vector<validation::Check> checks;
    checks.push_back(validation::kernel_row_sums(b));
    checks.push_back(validation::values_finite(sol.values));
    checks.push_back(validation::terminal_values(m, g, sol.values));
    checks.push_back(validation::policy_feasible(g, b, sol.policy));
    checks.push_back(validation::bellman_residual(m, g, b, contexts, sol, 100, 99));
    checks.push_back(validation::terminal_structure(m, g, sol.values));
    if (validation::zero_cost_model(m)) {
      checks.push_back(validation::values_zero(sol.values));
    } else if (m.horizon > 0) {
      const validation::PolicyStructure ps = validation::last_period_structure(m, g, sol.policy);
      for (const validation::Check& c : {ps.empty_no_discharge, ps.empty_fuel_corner, ps.full_no_charge, ps.surplus_idle}) {
        checks.push_back(c);
      }
    }
    if (m.horizon > 0) checks.push_back(validation::chance_constraint(*summary, 2.0 * m.cons.epsilon));
    std::ofstream out(file("report.txt"));
    if (!out) throw IoError("cannot write " + file("report.txt"));
    for (const validation::Check& c : checks) {
      const std::string line = validation::format(c);
      out << line << '\n';
      log << "validate: " << line << '\n';
      result.report.push_back(line);
      result.validation_passed = result.validation_passed && c.passed;
    }
  }

  void write_manifest() const {
    std::ofstream out(file("manifest.tsv"));
    if (!out) throw IoError("cannot write " + file("manifest.tsv"));
    out << "stage\tinput_hash\toutput_hash\twall_s\n";
    for (Stage s : kOrder) {
      auto it = manifest.find(config::stage_name(s));
      if (it == manifest.end()) continue;
      out << it->first << '\t' << hex(it->second.input_hash) << '\t' << hex(it->second.output_hash) << '\t'
          << std::fixed << std::setprecision(3) << it->second.wall_s << '\n';
    }
  }
};

std::uint64_t parse_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

std::vector<std::string> stage_outputs(Stage s) {
  switch (s) {
    case Stage::Assemble: return {"full_order.txt"};
    case Stage::Reduce: return {"reduced.json"};
    case Stage::Kernel: return {"grid.json", "kernels.bin"};
    case Stage::Solve: return {"tables.bin"};
    case Stage::Simulate: return {"paths.csv", "summary.csv", "cost_summary.csv"};
    case Stage::Validate: return {"report.txt"};
  }
  return {};
}

std::uint64_t hash_files(const std::vector<std::string>& paths) {
  std::uint64_t h = 14695981039346656037ull;
  std::vector<char> buf(1 << 20);
  for (const std::string& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      const std::streamsize got = in.gcount();
      for (std::streamsize i = 0; i < got; ++i) {
        h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

std::map<std::string, ManifestEntry> read_manifest(const std::string& path) {
  std::map<std::string, ManifestEntry> out;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string stage, ih, oh;
    double wall = 0.0;
    if (!(row >> stage >> ih >> oh >> wall)) continue;
    try {
      out[stage] = {parse_hex(ih), parse_hex(oh), wall};
    } catch (const std::exception&) {
      // Unreadable entries simply force a rebuild.
    }
  }
  return out;
}

Result run(const config::ExperimentConfig& cfg, const std::vector<Stage>& stages, const Options& options) {
  NullBuffer null_buffer;
  std::ostream null_stream(&null_buffer);
  fs::create_directories(options.workdir);
  Run r(cfg, options, options.log ? *options.log : null_stream, fs::path(options.workdir));
  r.manifest = read_manifest(r.file("manifest.tsv"));
  {
    std::ofstream canon(r.file("config.canonical.cfg"));
    canon << config::dump(cfg);
  }

  int last = -1;
  for (Stage s : stages) last = std::max(last, static_cast<int>(s));
  Result result;
  for (Stage s : kOrder) {
    const int idx = static_cast<int>(s);
    if (idx > last) break;
    StageRecord rec;
    rec.stage = s;
    rec.input_hash = r.input_hash(s);
    const auto t0 = std::chrono::steady_clock::now();
    if (r.cache_valid(s, rec.input_hash)) {
      rec.cached = true;
      rec.output_hash = r.manifest[config::stage_name(s)].output_hash;
      rec.wall_s = r.manifest[config::stage_name(s)].wall_s;
      r.log << config::stage_name(s) << ": reused from cache\n";
    } else {
      r.build(s, result);
      rec.output_hash = hash_files(r.output_files(s));
      rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.log << config::stage_name(s) << ": done in " << rec.wall_s << " s\n";
      r.manifest[config::stage_name(s)] = {rec.input_hash, rec.output_hash, rec.wall_s};
      r.write_manifest();
    }
    r.outputs[idx] = rec.output_hash;
    result.records.push_back(rec);
  }
  return result;
}

void save_grid(const grid::StateGrid& g, const std::string& path) {
  auto axis = [](const grid::AxisGrid& a) { return nlohmann::json{{"name", a.name()}, {"points", a.points()}}; };
  nlohmann::json j;
  j["r"] = axis(g.r());
  j["p"] = axis(g.p());
  j["y"] = nlohmann::json::array();
  for (const grid::AxisGrid& a : g.y()) j["y"].push_back(axis(a));
  j["hash"] = hex(g.hash());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(1) << '\n';
}

grid::StateGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("load_grid: " + std::string(e.what()));
  }
  auto axis = [](const nlohmann::json& a) {
    return grid::AxisGrid(a.at("name").get<std::string>(), a.at("points").get<std::vector<double>>());
  };
  std::vector<grid::AxisGrid> ys;
  for (const auto& a : j.at("y")) ys.push_back(axis(a));
  grid::StateGrid g(axis(j.at("r")), axis(j.at("p")), ys);
  if (hex(g.hash()) != j.at("hash").get<std::string>()) throw IoError("load_grid: hash mismatch in " + path);
  return g;
}

SliceSpec parse_slice(const std::string& text, const mdp::MdpModel& model, const grid::StateGrid& g, int horizon) {
  SliceSpec spec;
  std::vector<int> y(static_cast<std::size_t>(g.ell()), -1);
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw IndexError("slice: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "ges") {
      const mdp::ConstraintParams& c = model.cons;
      double q = 0.0;
      if (val == "empty") q = c.q_lo;
      else if (val == "half") q = 0.5 * (c.q_lo + c.q_hi);
      else if (val == "full") q = c.q_hi;
      else throw IndexError("slice: ges must be empty, half or full, got '" + val + "'");
      const std::vector<int> idx = g.y_multi(g.y_project(mdp::storage_state(model.ges, q)));
      for (std::size_t k = 0; k < y.size(); ++k) {
        if (y[k] < 0) y[k] = idx[k];
      }
      continue;
    }
    int v = 0;
    try {
      std::size_t used = 0;
      v = std::stoi(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw IndexError("slice: '" + key + "' needs an integer, got '" + val + "'");
    }
    if (key == "n") {
      if (v < 0 || v > horizon) throw IndexError("slice: n = " + val + " outside [0, " + std::to_string(horizon) + "]");
      spec.n = v;
    } else if (key.size() > 1 && key[0] == 'y') {
      int k = 0;
      try {
        k = std::stoi(key.substr(1)) - 1;
      } catch (const std::exception&) {
        k = -1;
      }
      if (k < 0 || k >= g.ell()) throw IndexError("slice: unknown axis '" + key + "'");
      if (v < 0 || v >= g.y()[static_cast<std::size_t>(k)].size()) {
        throw IndexError("slice: " + key + " = " + val + " outside [0, " +
                         std::to_string(g.y()[static_cast<std::size_t>(k)].size() - 1) + "]");
      }
      y[static_cast<std::size_t>(k)] = v;
    } else {
      throw IndexError("slice: unknown key '" + key + "'");
    }
  }
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] < 0) throw IndexError("slice: y" + std::to_string(k + 1) + " not fixed (give ges= or every y index)");
  }
  spec.y_index = g.y_flat(y);
  return spec;
}

void export_slice(ExportKind kind, const solver::Solution& sol, const mdp::MdpModel& model, const grid::StateGrid& g,
                  const SliceSpec& slice, const std::string& path) {
  const int limit = kind == ExportKind::Value ? sol.values.horizon : sol.policy.horizon - 1;
  if (slice.n < 0 || slice.n > limit) {
    throw IndexError("export: n = " + std::to_string(slice.n) + " outside [0, " + std::to_string(limit) + "]");
  }
  if (slice.y_index < 0 || slice.y_index >= g.y_size()) throw IndexError("export: y index out of range");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << std::setprecision(12);
  out << (kind == ExportKind::Value ? "r_tilde_kw,p_c,value_eur\n" : "r_tilde_kw,p_c,action\n");
  const double mu_r = processes::seasonality_eval(model.demand_season, model.t_at(slice.n));
  for (int ir = 0; ir < g.r().size(); ++ir) {
    for (int ip = 0; ip < g.p().size(); ++ip) {
      const std::int64_t m = g.flat(ir, ip, slice.y_index);
      out << mu_r + g.r().point(ir) << ',' << g.p().point(ip) << ',';
      if (kind == ExportKind::Value) out << sol.values.at(slice.n, m);
      else out << to_int(sol.policy.at(slice.n, m));
      out << '\n';
    }
  }
}

Artifacts load_artifacts(const config::ExperimentConfig& cfg, const std::string& workdir) {
  const fs::path dir(workdir);
  Artifacts a;
  a.model = config::build_model(cfg, mor::load_reduced((dir / "reduced.json").string()));
  a.grid = load_grid((dir / "grid.json").string());
  a.solution = solver::load_tables((dir / "tables.bin").string());
  if (a.solution.values.grid_hash != a.grid.hash()) throw IoError("load_artifacts: tables do not match grid.json");
  return a;
}

}  // namespace geostore::pipeline
