#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nadd/config.hpp"

namespace nadd {

/// Bumped whenever a CSV column set or summary field changes meaning.
inline constexpr int kSchemaVersion = 1;

/// Environment variable that overrides the directory run outputs are placed under.
inline constexpr const char* kOutputRootEnv = "NADD_OUTPUT_ROOT";

struct Assertion {
  std::string name;
  bool pass;
  std::string detail;
};

struct RunRecord {
  std::string experiment;
  std::string config_hash;  // FNV-1a 64 of the canonical config text
  std::string input_hash;   // git blob id (SHA-1) of the config file as read
  std::string run_dir;
  std::string summary_path;
  std::vector<std::string> csv_files;  // relative to run_dir
  std::vector<Assertion> assertions;
  double duration_seconds = 0.0;

  bool pass() const;
};

/// Raised before anything runs when the config violates an invariant.
class ConfigInvalid : public std::runtime_error {
 public:
  explicit ConfigInvalid(std::vector<std::string> diagnostics);
  std::vector<std::string> diagnostics;
};

std::string fnv1a_hex(std::string_view bytes);
std::string git_blob_id(std::string_view bytes);

/// Validates, runs and persists one experiment under output_root/cfg.output_dir
/// (an absolute output_dir is used as is). input_text is the config as the
/// user wrote it and only feeds input_hash.
RunRecord run_experiment(const ExperimentConfig& cfg, const std::string& output_root, std::string_view input_text);

/// Loads the file and resolves the output root from NADD_OUTPUT_ROOT (default:
/// the working directory).
RunRecord run_experiment(const std::string& config_path);

/// Writes plot.py into run_dir for the recorded experiment and returns its path.
/// Throws std::runtime_error when a CSV it needs is missing or has no rows.
std::string emit_plot_script(const std::string& run_dir);

}  // namespace nadd
