#pragma once

#include <string>
#include <vector>

#include "hinftune/lti.hpp"
#include "hinftune/param_system.hpp"
#include "hinftune/subproblem.hpp"

namespace hinftune {

struct TuneConfig {
  Vector delta_k0;
  double alpha = 0.7;
  int k_max = 50;
  FrequencyGrid grid0;
  double conv_tol = 1e-4;
  FrequencyGrid validation_grid;  // optional dense grid, reported next to the bisection norm
  double stability_margin = 1e-8;
  double subproblem_tol = 1e-7;
  double norm_tol = 1e-10;

  void validate(Eigen::Index params) const;
};

struct TuneIteration {
  int index = 0;
  Vector k;                     // candidate
  double subproblem_gamma = kInf;
  double norm = kInf;           // bisection norm of the candidate (max over scenarios)
  double validation_norm = kInf;
  double peak_omega = 0.0;
  bool stable = false;
  bool accepted = false;
  bool shrink = false;
  int grid_additions = 0;
  Vector delta_k;               // trust region used for this iteration
  std::string note;
};

struct TuneReport {
  std::vector<std::string> names;
  Vector k0;
  double norm0 = kInf;
  std::vector<TuneIteration> iterations;
  Vector k_opt;
  double norm_opt = kInf;
  std::string termination;  // converged | stationary | k_max
  std::vector<std::size_t> final_grid_sizes;
};

// Thrown for InitialUnstable; carries the offending eigenvalues.
class UnstableStartError : public Error {
 public:
  UnstableStartError(const std::string& what, std::vector<Complex> eigenvalues)
      : Error(ErrorKind::InitialUnstable, what), eigenvalues_(std::move(eigenvalues)) {}
  const std::vector<Complex>& eigenvalues() const { return eigenvalues_; }

 private:
  std::vector<Complex> eigenvalues_;
};

// Thrown for NoProgress; carries the report up to the failure.
class TuneError : public Error {
 public:
  TuneError(ErrorKind kind, const std::string& what, TuneReport report)
      : Error(kind, what), report_(std::move(report)) {}
  const TuneReport& report() const { return report_; }

 private:
  TuneReport report_;
};

struct ScenarioSet {
  std::vector<ParamSystem> systems;
  std::vector<FrequencyGrid> grids;  // empty entries fall back to TuneConfig::grid0
};

TuneReport tune(const ParamSystem& sys, const Vector& k0, const TuneConfig& cfg);
TuneReport tune_multi(const ScenarioSet& scen, const Vector& k0, const TuneConfig& cfg);

// Adds |Im| of the rightmost eigenvalue of A(k_rejected) when its real part
// exceeds -margin, and peak_omega. Returns the number of new samples.
int refine_grid(FrequencyGrid& grid, const ParamSystem& sys, const Vector& k_rejected,
                double peak_omega, double margin = 1e-8);

// Every accepted iterate stable and accepted norms strictly decreasing.
bool safeguard_check(const TuneReport& report);

}  // namespace hinftune
