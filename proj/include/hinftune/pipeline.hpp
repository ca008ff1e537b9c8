#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hinftune/config.hpp"

namespace hinftune {

inline constexpr const char* kToolName = "hinftune";
inline constexpr const char* kToolVersion = "0.1.0";

struct RunResult {
  std::vector<std::string> outputs;  // relative to the output directory
  std::string summary;               // one line for the log
};

// Each command writes run_manifest.json first, then its outputs, every file
// through a temporary and a rename.
//
// analyze:  poles.csv, sigma_sweep.csv, norm_summary.json
// tune:     tune_report.csv, tune_summary.json, tuned_parameters.json
// simulate: trajectory_<scenario>_<label>_<linear|nonlinear>.csv, metrics.csv
RunResult run_analyze(const RunConfig& cfg, const std::filesystem::path& out_dir);
RunResult run_tune(const RunConfig& cfg, const std::filesystem::path& out_dir);
RunResult run_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir);

void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// Shortest round-trip decimal; "inf", "-inf", "nan" for non-finite values.
std::string format_number(double v);

}  // namespace hinftune
