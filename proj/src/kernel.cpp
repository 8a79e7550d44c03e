#include "geostore/kernel.hpp"

#include "geostore/errors.hpp"

#include "json.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>

namespace geostore::kernel {

namespace {

class Fnv {
 public:
  void add(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h_ ^= (v >> (8 * b)) & 0xffu;
      h_ *= 1099511628211ULL;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  void add(const Matrix& m) {
    add(static_cast<std::uint64_t>(m.rows()));
    add(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) add(m(i, j));
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 1469598103934665603ULL;
};

template <class T>
void write_pod(std::ofstream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
void read_pod(std::ifstream& in, std::vector<T>& v, std::size_t count) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw IoError("kernel file truncated");
}

constexpr const char* kMagic = "geostore-kernel-v1";

}  // namespace

CachePlan kernel_cache_plan(const grid::StateGrid& grid, const mdp::TransitionContext& ctx, Action a,
                            double psi_quantum) {
  CachePlan plan;
  plan.y_key.assign(static_cast<std::size_t>(grid.y_size()), 0);
  if (a != Action::ChargeGes) {
    plan.shifts.push_back(0.0);
    return plan;
  }
  const RowVector& row = ctx.terms(a).psi_row;
  std::map<double, std::int32_t> exact;
  std::map<long long, std::int32_t> quantized;
  for (std::int64_t iy = 0; iy < grid.y_size(); ++iy) {
    const double s = row.dot(grid.y_point(iy));
    std::int32_t key = 0;
    if (psi_quantum > 0.0) {
      const long long q = std::llround(s / psi_quantum);
      auto [it, inserted] = quantized.emplace(q, static_cast<std::int32_t>(plan.shifts.size()));
      if (inserted) plan.shifts.push_back(static_cast<double>(q) * psi_quantum);
      key = it->second;
    } else {
      auto [it, inserted] = exact.emplace(s, static_cast<std::int32_t>(plan.shifts.size()));
      if (inserted) plan.shifts.push_back(s);
      key = it->second;
    }
    plan.y_key[static_cast<std::size_t>(iy)] = key;
  }
  return plan;
}

FeasibilityMask feasibility_mask(const mdp::MdpModel& model, const mdp::TransitionContext& ctx,
                                 const grid::StateGrid& grid, int threads) {
  FeasibilityMask mask;
  const auto rows = static_cast<std::size_t>(grid.size());
  mask.allowed.assign(rows, 0);
  mask.reasons.assign(rows * 5, 0);
  numerics::parallel_for(rows, threads, [&](std::size_t m) {
    const mdp::Feasibility f = mdp::feasibility(ctx, grid.state(static_cast<std::int64_t>(m)), model);
    mask.allowed[m] = f.allowed.bits();
    for (std::size_t k = 0; k < 5; ++k) mask.reasons[m * 5 + k] = f.reason[k];
  });
  for (std::size_t m = 0; m < rows; ++m) {
    if (mask.allowed[m] == 0) {
      // Reproduce the diagnostic message of the pointwise check.
      mdp::feasible_actions(ctx, grid.state(static_cast<std::int64_t>(m)), model);
    }
  }
  return mask;
}

ActionKernel build_kernel(const mdp::TransitionContext& ctx, const grid::StateGrid& grid, Action a,
                          const FeasibilityMask& mask, const KernelOptions& options) {
  ActionKernel k;
  k.built = true;
  k.block_size = grid.block_size();
  const int n_p = grid.p().size();
  const mdp::ActionTerms& terms = ctx.terms(a);

  k.y_target.resize(static_cast<std::size_t>(grid.y_size()));
  for (std::int64_t iy = 0; iy < grid.y_size(); ++iy) {
    const Vector next = terms.e * grid.y_point(iy) + terms.c;
    k.y_target[static_cast<std::size_t>(iy)] = static_cast<std::int32_t>(grid.y_project(next));
  }

  const CachePlan plan = kernel_cache_plan(grid, ctx, a, options.psi_quantum);
  const auto num_keys = static_cast<std::int64_t>(plan.shifts.size());
  std::vector<std::int32_t> slot(static_cast<std::size_t>(num_keys * k.block_size), -1);
  k.row_block.assign(static_cast<std::size_t>(grid.size()), -1);
  const std::uint8_t bit = static_cast<std::uint8_t>(1u << action_index(a));
  std::vector<std::int64_t> needed;
  for (std::int64_t m = 0; m < grid.size(); ++m) {
    if (!(mask.allowed[static_cast<std::size_t>(m)] & bit)) continue;
    int ir = 0, ip = 0;
    std::int64_t iy = 0;
    grid.split(m, ir, ip, iy);
    const std::int64_t key = plan.y_key[static_cast<std::size_t>(iy)];
    const std::int64_t s = key * k.block_size + static_cast<std::int64_t>(ir) * n_p + ip;
    std::int32_t& b = slot[static_cast<std::size_t>(s)];
    if (b < 0) {
      b = static_cast<std::int32_t>(needed.size());
      needed.push_back(s);
    }
    k.row_block[static_cast<std::size_t>(m)] = b;
  }
  k.num_blocks = static_cast<std::int64_t>(needed.size());
  k.blocks.assign(static_cast<std::size_t>(k.num_blocks * k.block_size), 0.0);
  k.cell_evaluations = k.num_blocks * k.block_size;

  const std::vector<double> r_edges = grid.r().edges();
  const std::vector<double> p_edges = grid.p().edges();
  std::vector<std::string> failures(needed.size());
  numerics::parallel_for(needed.size(), options.threads, [&](std::size_t b) {
    const std::int64_t s = needed[b];
    const std::int64_t key = s / k.block_size;
    const int ir = static_cast<int>((s % k.block_size) / n_p);
    const int ip = static_cast<int>(s % n_p);
    mdp::State src;
    src.r = grid.r().point(ir);
    src.p = grid.p().point(ip);
    numerics::BivariateNormal law;
    law.mean_r = ctx.decay_r * src.r;
    law.mean_p = (a == Action::OverSpill ? ctx.decay_p * src.p
                                         : ctx.decay_p * src.p + ctx.h_r * src.r) +
                 terms.h_const + plan.shifts[static_cast<std::size_t>(key)];
    law.sd_r = ctx.sigma_r;
    law.sd_p = terms.sigma_p;
    law.corr = terms.rho;
    std::span<double> out(k.blocks.data() + static_cast<std::int64_t>(b) * k.block_size,
                          static_cast<std::size_t>(k.block_size));
    numerics::gaussian_grid_probs(law, r_edges, p_edges, out);
    double sum = 0.0;
    for (double v : out) sum += v;
    if (std::abs(1.0 - sum) > 1e-6) {
      failures[b] = "row sum " + std::to_string(sum) + " at r=" + std::to_string(src.r) +
                    " p=" + std::to_string(src.p);
      return;
    }
    for (double& v : out) v /= sum;
  });
  for (const std::string& f : failures) {
    if (!f.empty()) throw KernelAccuracyError("build_kernel: a=" + std::to_string(to_int(a)) + ": " + f);
  }
  return k;
}

std::uint64_t context_hash(const mdp::TransitionContext& ctx) {
  Fnv h;
  h.add(ctx.dt);
  h.add(ctx.decay_r);
  h.add(ctx.decay_p);
  h.add(ctx.sigma_r);
  h.add(ctx.h_r);
  h.add(Matrix(ctx.c_m));
  for (const mdp::ActionTerms& t : ctx.act) {
    h.add(t.e);
    h.add(Matrix(t.c));
    h.add(t.h_const);
    h.add(Matrix(t.psi_row));
    h.add(t.sigma_p);
    h.add(t.rho);
  }
  return h.value();
}

KernelSet build_kernel_set(const mdp::MdpModel& model, const mdp::TransitionContext& ctx,
                           const grid::StateGrid& grid, const KernelOptions& options) {
  KernelSet set;
  set.grid_hash = grid.hash();
  set.context_hash = context_hash(ctx);
  set.mask = feasibility_mask(model, ctx, grid, options.threads);
  for (Action a : kAllActions) set.kernels[action_index(a)] = build_kernel(ctx, grid, a, set.mask, options);
  return set;
}

KernelBundle build_kernel_bundle(const mdp::MdpModel& model, const std::vector<mdp::TransitionContext>& contexts,
                                 const grid::StateGrid& grid, const KernelOptions& options) {
  KernelBundle bundle;
  std::map<std::uint64_t, std::int32_t> seen;
  for (const mdp::TransitionContext& ctx : contexts) {
    const std::uint64_t h = context_hash(ctx);
    auto it = seen.find(h);
    if (it == seen.end()) {
      it = seen.emplace(h, static_cast<std::int32_t>(bundle.sets.size())).first;
      bundle.sets.push_back(build_kernel_set(model, ctx, grid, options));
    }
    bundle.period_set.push_back(it->second);
  }
  return bundle;
}

double max_row_defect(const KernelSet& set) {
  double worst = 0.0;
  for (const ActionKernel& k : set.kernels) {
    if (!k.built) continue;
    for (std::int64_t b = 0; b < k.num_blocks; ++b) {
      double sum = 0.0;
      for (std::int64_t i = 0; i < k.block_size; ++i) {
        const double v = k.blocks[static_cast<std::size_t>(b * k.block_size + i)];
        if (v < 0.0 || v > 1.0) return kInf;
        sum += v;
      }
      worst = std::max(worst, std::abs(1.0 - sum));
    }
  }
  return worst;
}

void save_bundle(const KernelBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  nlohmann::json header;
  header["period_set"] = bundle.period_set;
  header["sets"] = nlohmann::json::array();
  for (const KernelSet& s : bundle.sets) {
    nlohmann::json js;
    js["grid_hash"] = s.grid_hash;
    js["context_hash"] = s.context_hash;
    js["rows"] = s.mask.allowed.size();
    js["actions"] = nlohmann::json::array();
    for (const ActionKernel& k : s.kernels) {
      js["actions"].push_back({{"built", k.built},
                               {"block_size", k.block_size},
                               {"num_blocks", k.num_blocks},
                               {"y_size", k.y_target.size()},
                               {"cell_evaluations", k.cell_evaluations}});
    }
    header["sets"].push_back(js);
  }
  out << kMagic << '\n' << header.dump() << '\n';
  for (const KernelSet& s : bundle.sets) {
    write_pod(out, s.mask.allowed);
    write_pod(out, s.mask.reasons);
    for (const ActionKernel& k : s.kernels) {
      write_pod(out, k.row_block);
      write_pod(out, k.y_target);
      write_pod(out, k.blocks);
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

KernelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string magic, line;
  std::getline(in, magic);
  if (magic != kMagic) throw IoError(path + ": not a kernel file");
  std::getline(in, line);
  const nlohmann::json header = nlohmann::json::parse(line);
  KernelBundle bundle;
  bundle.period_set = header.at("period_set").get<std::vector<std::int32_t>>();
  for (const auto& js : header.at("sets")) {
    KernelSet s;
    s.grid_hash = js.at("grid_hash").get<std::uint64_t>();
    s.context_hash = js.at("context_hash").get<std::uint64_t>();
    const auto rows = js.at("rows").get<std::size_t>();
    read_pod(in, s.mask.allowed, rows);
    read_pod(in, s.mask.reasons, rows * 5);
    for (std::size_t a = 0; a < 5; ++a) {
      const auto& ja = js.at("actions").at(a);
      ActionKernel& k = s.kernels[a];
      k.built = ja.at("built").get<bool>();
      k.block_size = ja.at("block_size").get<std::int64_t>();
      k.num_blocks = ja.at("num_blocks").get<std::int64_t>();
      k.cell_evaluations = ja.at("cell_evaluations").get<std::int64_t>();
      read_pod(in, k.row_block, k.built ? rows : 0);
      read_pod(in, k.y_target, ja.at("y_size").get<std::size_t>());
      read_pod(in, k.blocks, static_cast<std::size_t>(k.num_blocks * k.block_size));
    }
    bundle.sets.push_back(std::move(s));
  }
  return bundle;
}

}  // namespace geostore::kernel
