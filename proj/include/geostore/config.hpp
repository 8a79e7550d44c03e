#pragma once

#include "geostore/ges_model.hpp"
#include "geostore/grid.hpp"
#include "geostore/mdp.hpp"
#include "geostore/mor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace geostore::config {

struct ReductionConfig {
  int ell = 4;
  mor::OutletMode outlet_mode = mor::OutletMode::Reconstruct;
  std::vector<ges::Mode> gramian_modes{ges::Mode::Charge, ges::Mode::Idle, ges::Mode::Discharge};
  mor::GramianMethod method = mor::GramianMethod::Auto;
};

/// Mean-reverting process with a seasonal mean; components are given as
/// parallel lists.
struct ProcessConfig {
  double mu0 = 0.0;
  std::vector<double> amplitude, period_h, shift_h;
  double beta = 0.5;           // 1/h
  std::vector<double> sigma{0.0};
  double x0 = 0.0;
};

struct GridConfig {
  grid::AxisCounts counts;
  double pad = 0.1;
  int envelope_periods = 240;
  std::uint64_t envelope_seed = 11;
};

struct SimulationConfig {
  int n_paths = 1000;
  std::uint64_t seed = 2024;
  double r0 = 0.0;    // deseasonalized, kW
  double p0 = 40.0;   // °C
  double qm0 = 12.0;  // °C
};

/// Every model and run parameter in working units (hours, kW, °C, EUR, kWh).
struct ExperimentConfig {
  ges::Geometry geometry;
  double hx = 0.1, hy = 0.01;  // m
  ges::MaterialParams materials;
  ges::BoundaryParams boundary;
  std::vector<double> qg{15.0};
  double q0 = 10.0;
  ReductionConfig reduction;
  ProcessConfig demand;
  ProcessConfig fuel;
  mdp::IesParams ies;
  mdp::ConstraintParams constraints;
  mdp::OverspillGate gate = mdp::OverspillGate::Gated;
  mdp::CostParams costs;
  double horizon_h = 72.0;
  int periods = 72;
  GridConfig grid;
  double psi_quantum = 0.0;
  SimulationConfig simulation;

  double dt() const { return horizon_h / periods; }
};

/// Table 1 defaults. Omitted keys keep these values.
ExperimentConfig paper_defaults();

struct LoadResult {
  ExperimentConfig config;
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  bool ok() const { return violations.empty(); }
};

/// Parses `[section]` blocks of `key = value [unit]` lines. Every problem
/// is collected; nothing is fail-fast.
LoadResult parse_config(const std::string& text);
LoadResult read_config(const std::string& path);

/// read_config that throws ConfigError listing every violation.
ExperimentConfig load_config(const std::string& path);

/// Cross-field checks of an already converted config.
std::vector<std::string> validate(const ExperimentConfig& cfg);

/// Canonical text in working units; parse_config(dump(c)) reproduces c.
std::string dump(const ExperimentConfig& cfg);
/// Canonical text of the named sections only.
std::string dump_sections(const ExperimentConfig& cfg, const std::vector<std::string>& sections);

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed = 14695981039346656037ull);

enum class Stage { Assemble, Reduce, Kernel, Solve, Simulate, Validate };
const char* stage_name(Stage s);
/// Config sections a stage reads directly (upstream stages are chained by
/// their output hashes).
std::vector<std::string> stage_sections(Stage s);

processes::Seasonality seasonality(const ProcessConfig& p);
processes::OUParams ou_params(const ProcessConfig& p);

mor::BtOptions bt_options(const ExperimentConfig& cfg);
mdp::MdpModel build_model(const ExperimentConfig& cfg, const mor::GesDynamics& ges);
mdp::State start_state(const ExperimentConfig& cfg, const mor::GesDynamics& ges);

}  // namespace geostore::config
