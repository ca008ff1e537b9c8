#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hinftune/lti.hpp"
#include "hinftune/param_system.hpp"

namespace hinftune {

// SISO block kinds and their parameters:
//   gain            K                y = K u
//   inverse_gain    R                y = u / R        (governor droop 1/R_p)
//   integrator      K                K / s
//   first_order_lag K, T             K / (1 + sT)
//   lead_lag        T_num, T_den     (1 + s T_num) / (1 + s T_den)
//   washout         K, T_w           K s T_w / (1 + s T_w)
//   derivative_lag  K, T             s K / (1 + sT)   (rate feedback)
//   notch           A_1, A_2         1 / (1 + A_1 s + A_2 s^2)
//   limiter         min, max         identity when linearized
enum class BlockKind {
  Gain,
  InverseGain,
  Integrator,
  FirstOrderLag,
  LeadLag,
  Washout,
  DerivativeLag,
  Notch,
  Limiter,
};

const char* to_string(BlockKind kind);
std::optional<BlockKind> block_kind_from_string(const std::string& s);
const std::vector<std::string>& block_param_names(BlockKind kind);

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
};

class Block {
 public:
  Block(std::string id, BlockKind kind, std::map<std::string, double> params);

  static Block gain(std::string id, double k);
  static Block inverse_gain(std::string id, double r);
  static Block integrator(std::string id, double k = 1.0);
  static Block lag(std::string id, double k, double t);
  static Block lead_lag(std::string id, double t_num, double t_den);
  static Block washout(std::string id, double k, double t_w);
  static Block derivative_lag(std::string id, double k, double t);
  static Block notch(std::string id, double a1, double a2);
  static Block limiter(std::string id, double lo, double hi);

  // Marks a parameter tunable within [lower, upper].
  Block& tune(const std::string& param, double lower, double upper);

  const std::string& id() const { return id_; }
  BlockKind kind() const { return kind_; }
  double param(const std::string& name) const;
  const std::map<std::string, double>& params() const { return params_; }
  const std::map<std::string, Bounds>& tunables() const { return tunables_; }
  bool has_states() const;

  Block with_param(const std::string& name, double value) const;

  // Throws InvalidArgument on a violated invariant.
  void validate() const;

 private:
  std::string id_;
  BlockKind kind_;
  std::map<std::string, double> params_;
  std::map<std::string, Bounds> tunables_;
};

// Minimal realization of one block. Limiters realize as identity.
StateSpace block_to_ss(const Block& b);

// Signal connection. `from` names an external input or a block; `to` names a
// block input or an external output. Inputs to the same target are summed.
struct Connection {
  std::string from;
  std::string to;
  double gain = 1.0;
};

struct BlockDiagram {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<Block> blocks;
  std::vector<Connection> connections;

  // Single-chain helper: input -> blocks[0] -> ... -> output.
  static BlockDiagram chain(std::string input, std::vector<Block> blocks, std::string output);

  void validate() const;
};

// Parameterized system of the diagram. Parameter names are
// "<prefix><block id>.<param>", ordered lexicographically by (block id,
// parameter name). Throws IllPosedLoop for singular algebraic loops.
ParamSystem assemble(const BlockDiagram& diag, const std::string& prefix = "");

// Nominal (tunable values as declared) parameter vector of assemble(diag).
Vector nominal_parameters(const BlockDiagram& diag);

// Nonlinear evaluation of a diagram with limiters active: for a fixed
// parameter vector computes state derivative and outputs.
class DiagramDynamics {
 public:
  DiagramDynamics(const BlockDiagram& diag, const Vector& k);

  Eigen::Index states() const { return n_; }
  void evaluate(const Vector& x, const Vector& r, Vector& dx, Vector& y) const;

 private:
  struct Compiled {
    StateSpace ss;
    Eigen::Index offset;
    bool limiter;
    double lo, hi;
  };
  std::vector<Compiled> blocks_;
  Matrix w_uv_, w_ur_, w_yv_, w_yr_;
  std::vector<int> order_;  // topological order over feedthrough, empty if cyclic
  StateSpace linear_;
  Eigen::Index n_ = 0;
};

// Rational transfer matrix entry: numerator and denominator coefficients,
// highest power first. Proper entries only.
struct RationalEntry {
  int row = 0;
  int col = 0;
  std::vector<double> num;
  std::vector<double> den;
};

// Entry-wise controllable-canonical realization (not minimal across entries).
StateSpace realize_transfer_matrix(int rows, int cols, const std::vector<RationalEntry>& entries);

// Grid-forming inverter with frequency and voltage droop.
struct DroopInverter {
  std::string id = "inv";
  double k_p = 0.02;      // pu frequency per pu active power
  double k_q = 0.031;     // pu voltage per pu reactive power
  double t_f = 0.1;       // s
  double t_v = 0.1;       // s
  double omega_c = 1.0;   // pu
  double v_c = 1.0;       // pu
  double rating = 55e3;   // VA
  double omega_base = 2.0 * 3.14159265358979323846 * 50.0;  // rad/s
  // Setpoint limits, applied only in nonlinear simulation.
  double omega_min = -kInf, omega_max = kInf;
  double v_min = -kInf, v_max = kInf;
  // Tunable bounds for (K_P, K_Q, T_f, T_v).
  Bounds k_p_bounds{0.01, 0.05};
  Bounds k_q_bounds{0.01, 0.05};
  Bounds t_f_bounds{0.05, 0.5};
  Bounds t_v_bounds{0.05, 0.5};

  double omega_set(double p) const { return omega_c - k_p * p; }
  double v_set(double q) const { return v_c - k_q * q; }
  void validate() const;
};

// Linear 3-state prosumer model in deviation variables; states (omega, theta,
// V), inputs (P_p, Q_p), outputs (theta, V, omega). Parameters
// "<id>.K_P", "<id>.K_Q", "<id>.T_f", "<id>.T_v".
ParamSystem droop_inverter_model(const DroopInverter& inv);

}  // namespace hinftune
