#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "nadd/experiments.hpp"

using namespace nadd;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = NADD_SOURCE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool mentions(const std::vector<std::string>& diags, const std::string& prefix) {
  for (const auto& d : diags)
    if (d.rfind(prefix, 0) == 0) return true;
  return false;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kMinimal = R"(experiment: fig1-bimodal
mixture:
  - {weight: 0.5, mean: [-1], variance: [0.05], label: 0}
  - {weight: 0.5, mean: [1], variance: [0.05], label: 1}
)";

}  // namespace

TEST_CASE("hash test vectors") {
  CHECK(git_blob_id("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_id("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("every shipped config round-trips and validates") {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(kSource / "configs")) {
    if (entry.path().extension() != ".yaml") continue;
    ++seen;
    CAPTURE(entry.path().string());
    const auto cfg = load_config(entry.path().string());
    CHECK(validate_config(cfg).empty());
    const std::string text = serialize_config(cfg);
    const auto back = parse_config(text);
    CHECK(back == cfg);
    CHECK(serialize_config(back) == text);
  }
  CHECK(seen == static_cast<int>(experiment_names().size()));
}

TEST_CASE("defaults") {
  const auto cfg = parse_config(kMinimal);
  CHECK(cfg.output_dir == "runs/fig1-bimodal");
  CHECK(cfg.nadd.s_noise == 1.0);
  CHECK(cfg.nadd.s_max == std::numeric_limits<double>::max());
  CHECK(cfg.grid.n_steps == 29);
  CHECK(cfg.solver == SolverMethod::heun);
  CHECK(serialize_config(cfg).find("s_max: inf") != std::string::npos);
}

TEST_CASE("parse errors carry positions") {
  SUBCASE("syntax error") {
    try {
      load_config((kSource / "tests/data/syntax_error.yaml").string());
      FAIL("expected a parse error");
    } catch (const ConfigParseError& e) {
      CHECK(e.line >= 3);
      CHECK(e.column >= 1);
    }
  }
  SUBCASE("unknown key") {
    try {
      parse_config(std::string(kMinimal) + "nadd:\n  sigma_t_prme: 16\n");
      FAIL("expected a parse error");
    } catch (const ConfigParseError& e) {
      CHECK(e.line == 6);
      CHECK(e.column == 3);
      CHECK(std::string(e.what()).find("sigma_t_prme") != std::string::npos);
    }
  }
  SUBCASE("bad type") {
    try {
      parse_config(std::string(kMinimal) + "trials: lots\n");
      FAIL("expected a parse error");
    } catch (const ConfigParseError& e) {
      CHECK(e.line == 5);
      CHECK(e.column == 9);
    }
  }
  CHECK_THROWS_AS(parse_config(""), ConfigParseError);
  CHECK_THROWS_AS(load_config((kSource / "tests/data/no_such_file.yaml").string()), std::runtime_error);
}

TEST_CASE("validation reports field paths") {
  const auto cfg = load_config((kSource / "tests/data/invalid.yaml").string());
  const auto diags = validate_config(cfg);
  CHECK(mentions(diags, "nadd.sigma_t_stop"));
  CHECK(mentions(diags, "nadd.kappa_min"));
  CHECK(mentions(diags, "nadd.s_churn"));

  auto c = parse_config(kMinimal);
  c.experiment = "nope";
  CHECK(mentions(validate_config(c), "experiment"));
  c = parse_config(kMinimal);
  c.mixture[0].weight = 0.7;
  CHECK(mentions(validate_config(c), "mixture"));
  c = parse_config(kMinimal);
  c.mixture[1].mean = {1, 2};
  CHECK(mentions(validate_config(c), "mixture[1].mean"));
  c = parse_config(kMinimal);
  c.experiment = "ablation-tprime";
  c.sweep = {1.0};
  CHECK(mentions(validate_config(c), "sweep"));
  c = parse_config(kMinimal);
  c.experiment = "theorem-verify";
  c.theorem.kappa_min = 0.5;
  CHECK(mentions(validate_config(c), "theorem.kappa_min"));

  ExperimentConfig bad = parse_config(kMinimal);
  bad.trials = 0;
  CHECK_THROWS_AS(run_experiment(bad, fs::temp_directory_path().string(), ""), ConfigInvalid);
}

TEST_CASE("runs are reproducible and plottable") {
  const auto path = kSource / "tests/data/fig1_small.yaml";
  const auto cfg = load_config(path.string());
  const std::string text = slurp(path);
  TempDir a("nadd_harness_a"), b("nadd_harness_b");
  const auto ra = run_experiment(cfg, a.path.string(), text);
  const auto rb = run_experiment(cfg, b.path.string(), text);
  CHECK(ra.pass());
  CHECK(ra.config_hash == rb.config_hash);
  CHECK(ra.input_hash == git_blob_id(text));
  CHECK(slurp(ra.summary_path) == slurp(rb.summary_path));

  const auto summary = nlohmann::json::parse(slurp(ra.summary_path));
  CHECK(summary.at("schema_version") == kSchemaVersion);
  CHECK(summary.at("experiment") == "fig1-bimodal");
  CHECK(summary.at("status") == "PASS");
  CHECK_FALSE(summary.contains("duration_seconds"));
  const auto record = nlohmann::json::parse(slurp(fs::path(ra.run_dir) / "run_record.json"));
  CHECK(record.contains("duration_seconds"));

  // The stored canonical config reproduces the input config.
  CHECK(load_config((fs::path(ra.run_dir) / "config.yaml").string()) == cfg);

  for (const auto& f : ra.csv_files) CHECK(fs::exists(fs::path(ra.run_dir) / f));
  const auto script = emit_plot_script(ra.run_dir);
  CHECK(fs::exists(script));
  CHECK(slurp(script).find("KIND = \"trajectories\"") != std::string::npos);

  SUBCASE("refuses to plot an empty CSV") {
    const auto victim = fs::path(ra.run_dir) / ra.csv_files.front();
    const std::string content = slurp(victim);
    std::ofstream(victim, std::ios::trunc) << content.substr(0, content.find('\n') + 1);
    CHECK_THROWS_AS(emit_plot_script(ra.run_dir), std::runtime_error);
    fs::remove(victim);
    CHECK_THROWS_AS(emit_plot_script(ra.run_dir), std::runtime_error);
  }
  CHECK_THROWS_AS(emit_plot_script((a.path / "nowhere").string()), std::runtime_error);
}

TEST_CASE("failed assertions are reported") {
  const auto path = kSource / "tests/data/fig1_impossible.yaml";
  TempDir d("nadd_harness_fail");
  const auto r = run_experiment(load_config(path.string()), d.path.string(), slurp(path));
  CHECK_FALSE(r.pass());
  const auto summary = nlohmann::json::parse(slurp(r.summary_path));
  CHECK(summary.at("status") == "FAIL");
}
