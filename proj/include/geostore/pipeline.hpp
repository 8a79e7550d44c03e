#pragma once

#include "geostore/config.hpp"
#include "geostore/grid.hpp"
#include "geostore/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace geostore::pipeline {

/// Files written by each stage, relative to the work directory.
std::vector<std::string> stage_outputs(config::Stage s);

struct Options {
  std::string workdir = "work";
  int threads = 1;
  bool force = false;           // ignore cached artifacts
  std::ostream* log = nullptr;  // progress and cache notices
};

struct StageRecord {
  config::Stage stage = config::Stage::Assemble;
  std::uint64_t input_hash = 0;
  std::uint64_t output_hash = 0;
  double wall_s = 0.0;
  bool cached = false;
};

struct Result {
  std::vector<StageRecord> records;
  bool validation_passed = true;
  std::vector<std::string> report;  // validate stage lines
};

/// Runs the requested stages and every stage they depend on. A stage is
/// reused when the manifest records the same input hash and its outputs
/// still hash to the recorded value. The manifest (manifest.tsv) keeps the
/// latest line per stage: stage, input hash, output hash, wall seconds.
Result run(const config::ExperimentConfig& cfg, const std::vector<config::Stage>& stages, const Options& options);

/// Content hash of files (in order), FNV-1a over their bytes.
std::uint64_t hash_files(const std::vector<std::string>& paths);

/// Manifest entries by stage name.
struct ManifestEntry {
  std::uint64_t input_hash = 0;
  std::uint64_t output_hash = 0;
  double wall_s = 0.0;
};
std::map<std::string, ManifestEntry> read_manifest(const std::string& path);

void save_grid(const grid::StateGrid& grid, const std::string& path);
grid::StateGrid load_grid(const std::string& path);

/// Fixed coordinates of a 2D (r~, p) slice: "n=71,ges=empty" or explicit
/// y indices "n=0,y1=2,y2=2,y3=2,y4=0". `ges` accepts empty, half, full.
struct SliceSpec {
  int n = 0;
  std::int64_t y_index = 0;
};
SliceSpec parse_slice(const std::string& text, const mdp::MdpModel& model, const grid::StateGrid& grid,
                      int horizon);

enum class ExportKind { Value, Policy };

/// CSV over the (r, p) grid at the slice; r~ = mu_R(t_n) + r. Policy slices
/// carry integer action codes.
void export_slice(ExportKind kind, const solver::Solution& sol, const mdp::MdpModel& model,
                  const grid::StateGrid& grid, const SliceSpec& slice, const std::string& path);

/// Loads the reduced model, grid and tables of a finished work directory.
struct Artifacts {
  mdp::MdpModel model;
  grid::StateGrid grid;
  solver::Solution solution;
};
Artifacts load_artifacts(const config::ExperimentConfig& cfg, const std::string& workdir);

}  // namespace geostore::pipeline
