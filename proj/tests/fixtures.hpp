#pragma once

// Shared models for the unit tests. The reduced storage comes from the
// paper geometry on a coarse mesh (hx = 0.25 m, hy = 0.02 m) and is built
// once per process.

#include "geostore/config.hpp"
#include "geostore/grid.hpp"
#include "geostore/kernel.hpp"
#include "geostore/mdp.hpp"
#include "geostore/mor.hpp"
#include "geostore/solver.hpp"

#include <vector>

namespace fixtures {

inline geostore::config::ExperimentConfig coarse_config() {
  geostore::config::ExperimentConfig cfg = geostore::config::paper_defaults();
  cfg.hx = 0.25;
  cfg.hy = 0.02;
  return cfg;
}

inline const geostore::mor::GesDynamics& coarse_ges() {
  static const geostore::mor::GesDynamics g = [] {
    using namespace geostore;
    const config::ExperimentConfig cfg = coarse_config();
    const ges::FullOrderSystem full =
        ges::assemble_full_order(cfg.geometry, cfg.materials, cfg.boundary, cfg.hx, cfg.hy);
    mor::GesDynamics out;
    out.sys = mor::align_qm_coordinate(mor::balanced_truncation(full, cfg.reduction.ell, config::bt_options(cfg)));
    out.q_in_charge = cfg.boundary.q_in_charge;
    out.dt_hp = cfg.boundary.dt_hp;
    return out;
  }();
  return g;
}

/// Table 1 model on the coarse reduced storage.
inline geostore::mdp::MdpModel paper_model() {
  return geostore::config::build_model(coarse_config(), coarse_ges());
}

/// Model, small grid, contexts and kernels, ready for the solver.
struct Problem {
  geostore::mdp::MdpModel model;
  geostore::grid::StateGrid grid;
  std::vector<geostore::mdp::TransitionContext> contexts;
  geostore::kernel::KernelBundle bundle;
};

inline geostore::grid::AxisCounts small_counts() {
  geostore::grid::AxisCounts c;
  c.r = 4;
  c.p = 6;
  c.y = {2, 2, 2, 4};
  return c;
}

inline Problem make_problem(const geostore::mdp::MdpModel& model,
                            const geostore::grid::AxisCounts& counts = small_counts()) {
  using namespace geostore;
  Problem p;
  p.model = model;
  const grid::Envelope env = grid::simulate_envelope(model, 240, 11);
  p.grid = grid::build_axes(model, counts, env, 0.1);
  p.contexts = solver::build_contexts(model);
  p.bundle = kernel::build_kernel_bundle(model, p.contexts, p.grid);
  return p;
}

}  // namespace fixtures
