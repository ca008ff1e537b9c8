#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hinftune/gridmodel.hpp"
#include "hinftune/param_system.hpp"
#include "hinftune/tuner.hpp"

namespace hinftune {

// One system realization sharing the run's parameter vector.
struct Scenario {
  std::string name;
  ParamSystem system;  // analysis and tuning family
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  FrequencyGrid grid;  // tuning grid override, may be empty

  // Grid models only: nonlinear model, operating point at the initial
  // parameters and the linear family with power outputs for simulation.
  std::shared_ptr<const CoupledSystem> grid_model;
  std::shared_ptr<const OperatingPoint> op;
  std::optional<ParamSystem> sim_system;
  std::vector<std::string> sim_output_names;
};

struct AnalyzeSettings {
  FrequencyGrid sweep = FrequencyGrid::logspace(1e-3, 1e3, 400);
  double norm_tol = 1e-8;
};

struct SimulateSettings {
  double horizon = 10.0;
  double dt = 1e-3;
  double step_time = 0.1;
  std::map<std::string, double> step;  // by input name
  bool nonlinear = true;
  std::optional<Vector> compare;       // second parameter set
  std::string compare_label = "tuned";
};

struct RunConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::string hash;  // FNV-1a 64 of the config bytes, hex
  std::filesystem::path path;
  std::vector<std::filesystem::path> inputs;  // config plus referenced files

  std::vector<std::string> param_names;
  Vector lower, upper;
  Vector k_initial;

  std::vector<Scenario> scenarios;
  AnalyzeSettings analyze;
  TuneConfig tune;
  SimulateSettings simulate;
};

// Throws Error(Config) with "file:line:col" for syntax errors and the
// offending field path for semantic errors.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                       const std::string& source = "<config>");

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace hinftune
