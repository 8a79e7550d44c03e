#pragma once

#include "geostore/grid.hpp"
#include "geostore/mdp.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace geostore::kernel {

struct KernelOptions {
  /// Quantum for the a = -1 shift keys; 0 keys blocks by the exact value.
  double psi_quantum = 0.0;
  int threads = 1;
};

/// Which (r, p) block each source row uses. Blocks depend on (r-index,
/// p-index) and, for a = -1 only, on the shift psi(n, y) of the IES mean.
struct CachePlan {
  std::vector<double> shifts;       // one per key
  std::vector<std::int32_t> y_key;  // per y index
};

CachePlan kernel_cache_plan(const grid::StateGrid& grid, const mdp::TransitionContext& ctx, Action a,
                            double psi_quantum = 0.0);

/// Transition probabilities of one action, stored factored: row m moves to
/// (r', p', y') with probability blocks[row_block[m]][r' * N_p + p'] when
/// y' is the projected deterministic image y_target[y-index of m].
struct ActionKernel {
  bool built = false;
  std::int64_t block_size = 0;
  std::int64_t num_blocks = 0;
  std::vector<double> blocks;
  std::vector<std::int32_t> row_block;  // -1 where the action is infeasible
  std::vector<std::int32_t> y_target;
  std::int64_t cell_evaluations = 0;    // rectangle probabilities computed

  std::span<const double> block(std::int64_t m) const {
    const std::int32_t b = row_block[static_cast<std::size_t>(m)];
    return {blocks.data() + static_cast<std::int64_t>(b) * block_size, static_cast<std::size_t>(block_size)};
  }
};

/// Feasible action sets over the grid for one period.
struct FeasibilityMask {
  std::vector<std::uint8_t> allowed;  // ActionSet bits per row
  std::vector<std::uint8_t> reasons;  // 5 exclusion-reason bytes per row
};

FeasibilityMask feasibility_mask(const mdp::MdpModel& model, const mdp::TransitionContext& ctx,
                                 const grid::StateGrid& grid, int threads = 1);

ActionKernel build_kernel(const mdp::TransitionContext& ctx, const grid::StateGrid& grid, Action a,
                          const FeasibilityMask& mask, const KernelOptions& options = {});

struct KernelSet {
  std::uint64_t grid_hash = 0;
  std::uint64_t context_hash = 0;
  FeasibilityMask mask;
  std::array<ActionKernel, 5> kernels;

  const ActionKernel& kernel(Action a) const { return kernels[action_index(a)]; }
  ActionSet allowed(std::int64_t m) const { return ActionSet(mask.allowed[static_cast<std::size_t>(m)]); }
};

/// Kernels of every period; periods with identical transition data share a set.
struct KernelBundle {
  std::vector<KernelSet> sets;
  std::vector<std::int32_t> period_set;

  const KernelSet& for_period(int n) const { return sets[static_cast<std::size_t>(period_set[static_cast<std::size_t>(n)])]; }
};

/// FNV-1a over every number of a context that kernels and masks depend on.
std::uint64_t context_hash(const mdp::TransitionContext& ctx);

KernelSet build_kernel_set(const mdp::MdpModel& model, const mdp::TransitionContext& ctx,
                           const grid::StateGrid& grid, const KernelOptions& options = {});

KernelBundle build_kernel_bundle(const mdp::MdpModel& model, const std::vector<mdp::TransitionContext>& contexts,
                                 const grid::StateGrid& grid, const KernelOptions& options = {});

/// Largest |1 - row sum| over all built rows.
double max_row_defect(const KernelSet& set);

/// Binary file with a one-line text magic and a JSON header line.
void save_bundle(const KernelBundle& bundle, const std::string& path);
KernelBundle load_bundle(const std::string& path);

}  // namespace geostore::kernel
