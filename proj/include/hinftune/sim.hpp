#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hinftune/gridmodel.hpp"
#include "hinftune/lti.hpp"

namespace hinftune {

struct SimScenario {
  Vector w_step;           // disturbance applied for t >= step_time
  double step_time = 0.0;  // s
  double horizon = 10.0;   // s
  double dt = 1e-3;        // s
  std::vector<int> outputs;  // selected channels; empty selects all

  void validate() const;
};

// Uniformly sampled signals; values(i, c) is channel c at time(i).
struct Trajectory {
  std::vector<double> time;
  std::vector<std::string> channels;
  Matrix values;

  int channel(const std::string& name) const;  // -1 when absent
  Vector column(int c) const { return values.col(c); }
};

// Fixed-step RK4 of x' = Ax + Bw(t), y = Cx + Dw(t) from x = 0.
// Channels default to "y0", "y1", ...
Trajectory step_response_linear(const StateSpace& sys, const SimScenario& scen,
                                std::vector<std::string> names = {});

// Partitioned DAE integration: RK4 on the prosumer states, network equations
// re-solved by Newton at every stage, limiters active. Parameters from op.k.
// Channels per dynamic prosumer: "<id>.omega", "<id>.P", "<id>.Q", "<id>.V".
Trajectory simulate_nonlinear(const CoupledSystem& sys, const OperatingPoint& op,
                              const SimScenario& scen);

struct ResponseMetrics {
  double initial = 0.0;
  double final_value = 0.0;
  double overshoot = 0.0;      // fraction of the step size
  double settling_time = 0.0;  // s after the step, +-2 % band
  double osc_energy = 0.0;     // sum (y - final)^2 dt after the first peak
};

// Throws NoSteadyState when the last 10 % of the record leaves the band.
ResponseMetrics response_metrics(const std::vector<double>& time, const Vector& y,
                                 double step_time = 0.0, double band = 0.02);
std::vector<ResponseMetrics> response_metrics(const Trajectory& traj, double step_time = 0.0);

// Header "time,<channels>", one row per sample, shortest round-trip decimals.
void write_csv(const Trajectory& traj, std::ostream& os);
Trajectory read_csv(std::istream& is);

}  // namespace hinftune
