#include "doctest.h"

#include "geostore/config.hpp"
#include "geostore/errors.hpp"
#include "geostore/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace geostore;
using namespace geostore::config;
namespace fs = std::filesystem;

namespace {

std::string source_file(const std::string& rel) { return std::string(GEOSTORE_SOURCE_DIR) + "/" + rel; }

bool any_contains(const std::vector<std::string>& v, const std::string& a, const std::string& b = "") {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) {
    return s.find(a) != std::string::npos && (b.empty() || s.find(b) != std::string::npos);
  });
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("shipped configs load cleanly") {
    for (const char* f : {"configs/paper_table1.cfg", "configs/zero_cost.cfg"}) {
      const LoadResult r = read_config(source_file(f));
      INFO(f);
      CHECK(r.violations.empty());
    }
    const ExperimentConfig c = load_config(source_file("configs/paper_table1.cfg"));
    const ExperimentConfig d = paper_defaults();
    CHECK(c.ies.p_in == d.ies.p_in);
    CHECK(c.constraints.r_lo == doctest::Approx(d.constraints.r_lo));
    CHECK(c.demand.sigma[0] == doctest::Approx(13.95).epsilon(1e-3));
    CHECK(c.periods == 72);
  }

  TEST_CASE("dump round-trips") {
    ExperimentConfig c = paper_defaults();
    c.costs.delta = 0.05;
    c.grid.counts.p = 7;
    const LoadResult r = parse_config(dump(c));
    CHECK(r.violations.empty());
    CHECK(dump(r.config) == dump(c));
    CHECK(r.config.costs.delta == 0.05);
    CHECK(r.config.grid.counts.p == 7);
  }

  TEST_CASE("cross-field violations name the fields") {
    ExperimentConfig c = paper_defaults();
    c.demand.beta = c.ies.gamma;
    c.constraints.q_hi = 12.0;
    const auto v = validate(c);
    CHECK(any_contains(v, "demand.beta", "ies.gamma"));
    CHECK(any_contains(v, "ground.qg", "q_hi"));
  }

  TEST_CASE("parse errors are collected, not fail-fast") {
    const std::string text =
        "[ies]\n"
        "p_in = 40 furlongs\n"
        "bogus = 3\n"
        "p_out = 30 C\n"
        "p_out = 31 C\n"
        "[nowhere]\n"
        "x = 1\n";
    const LoadResult r = parse_config(text);
    CHECK_FALSE(r.ok());
    CHECK(any_contains(r.violations, "ies.p_in", "furlongs"));
    CHECK(any_contains(r.violations, "ies.bogus", "unknown field"));
    CHECK(any_contains(r.violations, "ies.p_out", "given twice"));
    CHECK(any_contains(r.violations, "[nowhere]"));
    CHECK(r.violations.size() >= 4);
  }

  TEST_CASE("units convert to working units") {
    const LoadResult r = parse_config("[ies]\ngamma = 3.27e-6 1/s\n[demand]\nmu0 = -4.64e3 J/s\n");
    CHECK(r.violations.empty());
    CHECK(r.config.ies.gamma == doctest::Approx(3.27e-6 * 3600.0));
    CHECK(r.config.demand.mu0 == doctest::Approx(-4.64));
    CHECK_THROWS_AS(load_config("/nonexistent/geostore.cfg"), ConfigError);
  }

  TEST_CASE("fnv1a matches the published test vectors") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
  }

  TEST_CASE("stages read disjoint config sections") {
    std::vector<std::string> all;
    for (Stage s : {Stage::Assemble, Stage::Reduce, Stage::Kernel, Stage::Solve, Stage::Simulate}) {
      for (const std::string& sec : stage_sections(s)) {
        CHECK(std::find(all.begin(), all.end(), sec) == all.end());
        all.push_back(sec);
      }
    }
    CHECK(std::find(all.begin(), all.end(), "costs") != all.end());
    CHECK(std::find(all.begin(), all.end(), "geometry") != all.end());
    CHECK(stage_sections(Stage::Validate).empty());
  }

  TEST_CASE("pipeline caches stages and reruns only what changed") {
    const fs::path dir = fresh_dir("geostore_pipeline_test");
    ExperimentConfig c = load_config(source_file("configs/zero_cost.cfg"));
    c.simulation.n_paths = 20;
    pipeline::Options o;
    o.workdir = dir.string();
    o.threads = 2;
    const pipeline::Result first = pipeline::run(c, {Stage::Validate}, o);
    REQUIRE(first.records.size() == 6);
    CHECK(first.validation_passed);
    for (const auto& rec : first.records) CHECK_FALSE(rec.cached);
    CHECK(pipeline::read_manifest((dir / "manifest.tsv").string()).size() == 6);
    const std::string report = slurp(dir / "report.txt");
    CHECK(report.find("values_zero") != std::string::npos);

    // Same config: every stage but the checks is reused, and the outputs
    // are unchanged.
    const pipeline::Result again = pipeline::run(c, {Stage::Validate}, o);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(again.records[i].cached == (i < 5));
      CHECK(again.records[i].output_hash == first.records[i].output_hash);
    }

    // A price change touches the solve stage and everything after it.
    c.costs.xi_p = 1.0;
    const pipeline::Result priced = pipeline::run(c, {Stage::Solve}, o);
    REQUIRE(priced.records.size() == 4);
    CHECK(priced.records[0].cached);
    CHECK(priced.records[1].cached);
    CHECK(priced.records[2].cached);
    CHECK_FALSE(priced.records[3].cached);
    CHECK(priced.records[3].output_hash != first.records[3].output_hash);

    // Forcing rebuilds and reproduces the same bytes.
    o.force = true;
    const pipeline::Result forced = pipeline::run(c, {Stage::Kernel}, o);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK_FALSE(forced.records[i].cached);
      CHECK(forced.records[i].output_hash == first.records[i].output_hash);
    }
    fs::remove_all(dir);
  }

  TEST_CASE("slices export from a finished work directory") {
    const fs::path dir = fresh_dir("geostore_export_test");
    ExperimentConfig c = load_config(source_file("configs/zero_cost.cfg"));
    c.simulation.n_paths = 5;
    pipeline::Options o;
    o.workdir = dir.string();
    pipeline::run(c, {Stage::Solve}, o);
    const pipeline::Artifacts a = pipeline::load_artifacts(c, dir.string());

    const auto spec = pipeline::parse_slice("n=71,ges=empty", a.model, a.grid, c.periods);
    CHECK(spec.n == 71);
    const fs::path csv = dir / "value.csv";
    pipeline::export_slice(pipeline::ExportKind::Value, a.solution, a.model, a.grid, spec, csv.string());
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "r_tilde_kw,p_c,value_eur");
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      CHECK(std::stod(line.substr(line.rfind(',') + 1)) == 0.0);
    }
    CHECK(rows == a.grid.r().size() * a.grid.p().size());

    const auto explicit_y = pipeline::parse_slice("n=0,y1=0,y2=1,y3=2,y4=3", a.model, a.grid, c.periods);
    CHECK(explicit_y.y_index == a.grid.y_flat({0, 1, 2, 3}));
    CHECK_THROWS_AS(pipeline::parse_slice("n=73,ges=full", a.model, a.grid, c.periods), IndexError);
    CHECK_THROWS_AS(pipeline::parse_slice("n=0,y1=9,y2=0,y3=0,y4=0", a.model, a.grid, c.periods), IndexError);
    CHECK_THROWS_AS(pipeline::parse_slice("n=0,ges=brim", a.model, a.grid, c.periods), IndexError);
    CHECK_THROWS_AS(pipeline::parse_slice("n=0", a.model, a.grid, c.periods), IndexError);
    const auto last = pipeline::parse_slice("n=72,ges=full", a.model, a.grid, c.periods);
    CHECK_THROWS_AS(pipeline::export_slice(pipeline::ExportKind::Policy, a.solution, a.model, a.grid, last,
                                           (dir / "p.csv").string()),
                    IndexError);
    fs::remove_all(dir);
  }
}
