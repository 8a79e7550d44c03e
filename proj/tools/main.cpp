// Command-line driver: geostore <stage> --config FILE --workdir DIR.
#include "geostore/config.hpp"
#include "geostore/errors.hpp"
#include "geostore/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <iostream>
#include <optional>
#include <string>

namespace {

const char* error_kind(const geostore::Error& e) {
  using namespace geostore;
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const IndexError*>(&e)) return "index";
  if (dynamic_cast<const InfeasibilityError*>(&e)) return "infeasibility";
  if (dynamic_cast<const KernelAccuracyError*>(&e)) return "kernel_accuracy";
  if (dynamic_cast<const StabilityError*>(&e)) return "stability";
  if (dynamic_cast<const SingularityError*>(&e)) return "singularity";
  if (dynamic_cast<const GeometryError*>(&e)) return "geometry";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const RankError*>(&e)) return "rank";
  return "domain";
}

}  // namespace

int main(int argc, char** argv) {
  using geostore::config::Stage;
  CLI::App app{"Cost-optimal management of a heating system with internal and geothermal storage"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string workdir = "work";
  int threads = 1;
  std::optional<std::uint64_t> seed;
  bool force = false;
  app.add_option("--config", config_path, "Experiment configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--workdir", workdir, "Directory for artifacts and the manifest");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Override the simulation seed");
  app.add_flag("--force", force, "Rebuild every stage even when cached");

  const std::pair<const char*, Stage> stages[] = {
      {"assemble", Stage::Assemble}, {"reduce", Stage::Reduce},     {"kernel", Stage::Kernel},
      {"solve", Stage::Solve},       {"simulate", Stage::Simulate}, {"validate", Stage::Validate}};
  std::optional<Stage> chosen;
  for (const auto& [name, stage] : stages) {
    app.add_subcommand(name, std::string("Run the pipeline through the ") + name + " stage")
        ->callback([&chosen, stage = stage] { chosen = stage; });
  }

  std::string kind = "value";
  std::string slice = "n=0,ges=empty";
  std::string out = "slice.csv";
  CLI::App* exp = app.add_subcommand("export", "Write a 2D (r~, p) slice of the value or policy table as CSV");
  exp->add_option("--kind", kind, "value or policy")->check(CLI::IsMember({"value", "policy"}));
  exp->add_option("--slice", slice, "Fixed coordinates, e.g. n=71,ges=full or n=0,y1=2,y2=2,y3=2,y4=0");
  exp->add_option("--out", out, "Output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    geostore::config::LoadResult loaded = geostore::config::read_config(config_path);
    for (const std::string& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
    if (!loaded.ok()) {
      std::string msg = std::to_string(loaded.violations.size()) + " violation(s)";
      for (const std::string& v : loaded.violations) msg += "\n  " + v;
      throw geostore::ConfigError(msg);
    }
    geostore::config::ExperimentConfig cfg = loaded.config;
    if (seed) cfg.simulation.seed = *seed;

    if (exp->parsed()) {
      const geostore::pipeline::Artifacts a = geostore::pipeline::load_artifacts(cfg, workdir);
      const auto spec = geostore::pipeline::parse_slice(slice, a.model, a.grid, cfg.periods);
      geostore::pipeline::export_slice(
          kind == "value" ? geostore::pipeline::ExportKind::Value : geostore::pipeline::ExportKind::Policy,
          a.solution, a.model, a.grid, spec, out);
      std::cerr << "wrote " << out << '\n';
      return 0;
    }

    geostore::pipeline::Options opts;
    opts.workdir = workdir;
    opts.threads = threads;
    opts.force = force;
    opts.log = &std::cerr;
    const geostore::pipeline::Result result = geostore::pipeline::run(cfg, {*chosen}, opts);
    if (*chosen == Stage::Validate && !result.validation_passed) {
      std::cerr << "validation failed, see " << workdir << "/report.txt\n";
      return 1;
    }
    return 0;
  } catch (const geostore::Error& e) {
    nlohmann::json j{{"error", error_kind(e)}, {"message", e.what()}};
    std::cerr << j.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json j{{"error", "internal"}, {"message", e.what()}};
    std::cerr << j.dump() << '\n';
    return 3;
  }
}
