// nadd: run, validate and plot purification experiments.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "nadd/config.hpp"
#include "nadd/experiments.hpp"

namespace {

enum Exit { kOk = 0, kInvalid = 1, kFailed = 2, kAssertFail = 3 };

int cmd_validate(const std::string& path) {
  nadd::ExperimentConfig cfg;
  try {
    cfg = nadd::load_config(path);
  } catch (const nadd::ConfigParseError& e) {
    std::cerr << path << ":" << e.line << ":" << e.column << ": " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kInvalid;
  }
  const auto diags = nadd::validate_config(cfg);
  for (const auto& d : diags) std::cerr << path << ": " << d << "\n";
  if (diags.empty()) std::cout << path << ": ok\n";
  return diags.empty() ? kOk : kInvalid;
}

int cmd_run(const std::string& path) {
  try {
    const auto rec = nadd::run_experiment(path);
    for (const auto& a : rec.assertions) {
      std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
    }
    std::cout << rec.experiment << " -> " << rec.run_dir << " (" << rec.duration_seconds << " s)\n";
    return rec.pass() ? kOk : kAssertFail;
  } catch (const nadd::ConfigParseError& e) {
    std::cerr << path << ":" << e.line << ":" << e.column << ": " << e.what() << "\n";
    return kInvalid;
  } catch (const nadd::ConfigInvalid& e) {
    for (const auto& d : e.diagnostics) std::cerr << path << ": " << d << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "experiment failed: " << e.what() << "\n";
    return kFailed;
  }
}

int cmd_plot(const std::string& dir) {
  try {
    std::cout << nadd::emit_plot_script(dir) << "\n";
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-amplified diffusion purification experiments"};
  app.require_subcommand(1);
  std::string path;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", path, "YAML config")->required();
  auto* validate = app.add_subcommand("validate", "Check a config file and list every problem");
  validate->add_option("config", path, "YAML config")->required();
  auto* plot = app.add_subcommand("plot", "Write plot.py for a finished run directory");
  plot->add_option("run_dir", path, "Run directory")->required();
  auto* list = app.add_subcommand("list-experiments", "Print the experiment names");
  app.footer(std::string("Outputs go under $") + nadd::kOutputRootEnv + " (default: working directory).\n"
             "Exit codes: 0 ok, 1 invalid config, 2 experiment failure, 3 assertion FAIL.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  if (*run) return cmd_run(path);
  if (*validate) return cmd_validate(path);
  if (*plot) return cmd_plot(path);
  if (*list) {
    for (const auto& n : nadd::experiment_names()) std::cout << n << "\n";
    return kOk;
  }
  return kInvalid;
}
