#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hinftune/blocks.hpp"
#include "hinftune/lti.hpp"
#include "hinftune/param_system.hpp"

namespace hinftune {

enum class BusKind { Dynamic, Static };

// Series R-X branch with total line charging b_shunt split over both ends.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_shunt = 0.0;
};

// Bus conductance/susceptance matrices, Y = G_c + j B_s.
class Network {
 public:
  Network() = default;
  Network(Matrix g, Matrix b, std::vector<BusKind> kinds, double s_base = 1.0);
  static Network from_branches(int n_buses, const std::vector<Branch>& branches,
                               std::vector<BusKind> kinds, double s_base = 1.0);

  int buses() const { return static_cast<int>(g_.rows()); }
  const Matrix& g() const { return g_; }
  const Matrix& b() const { return b_; }
  const std::vector<BusKind>& kinds() const { return kinds_; }
  double s_base() const { return s_base_; }  // VA

 private:
  Matrix g_, b_;
  std::vector<BusKind> kinds_;
  double s_base_ = 1.0;
};

struct Injections {
  Vector p, q;
};

Injections power_injections(const Network& net, const Vector& v, const Vector& theta);

// Stacked (P_calc - P, Q_calc - Q).
Vector power_flow_residual(const Network& net, const Vector& v, const Vector& theta,
                           const Vector& p, const Vector& q);

// Jacobian of the stacked (P, Q) injections with respect to stacked (theta, V).
Matrix power_flow_jacobian(const Network& net, const Vector& v, const Vector& theta);

struct OperatingPoint {
  Vector v, theta, p, q;  // per bus
  Vector x0;              // prosumer states
  double omega_frame = 1.0;
  Vector k;               // parameters the point was solved for
};

// Newton-Raphson with flat start; PQ buses everywhere except the slack
// (V = v_slack, theta = 0). `p`, `q` are specified injections.
OperatingPoint solve_power_flow(const Network& net, const Vector& p, const Vector& q, int slack_bus,
                                double v_slack = 1.0, int max_iter = 50);

// Dynamic prosumer connected to one bus: inputs are the injected (P, Q) in
// system per unit, outputs the bus phasor (theta, V) and its frequency omega.
// theta is measured in a frame rotating at omega_frame.
class DynamicProsumer {
 public:
  virtual ~DynamicProsumer() = default;

  virtual const std::string& id() const = 0;
  virtual int bus() const = 0;
  virtual int states() const = 0;
  virtual std::vector<std::string> state_names() const = 0;
  virtual int theta_state() const = 0;

  // Local parameter names, sorted; global names are "<id>.<name>".
  virtual std::vector<std::string> param_names() const = 0;
  virtual Vector nominal() const = 0;
  virtual Vector lower() const = 0;
  virtual Vector upper() const = 0;

  virtual void dynamics(const Vector& x, double p, double q, const Vector& k, double omega_frame,
                        bool limiters, Vector& dx) const = 0;
  // (theta, V, omega)
  virtual Eigen::Vector3d outputs(const Vector& x, const Vector& k) const = 0;
  virtual Vector initial_guess(const Vector& k) const = 0;

  // Linearization about (x0, p0, q0): inputs (P, Q), outputs (theta, V, omega).
  virtual StateSpace linear(const Vector& x0, double p0, double q0, const Vector& k) const = 0;
};

// Droop inverter with power scaled from system base to the inverter rating.
class DroopProsumer : public DynamicProsumer {
 public:
  DroopProsumer(DroopInverter inv, int bus, double s_base);

  const std::string& id() const override { return inv_.id; }
  int bus() const override { return bus_; }
  int states() const override { return 3; }
  std::vector<std::string> state_names() const override;
  int theta_state() const override { return 1; }
  std::vector<std::string> param_names() const override;
  Vector nominal() const override;
  Vector lower() const override;
  Vector upper() const override;
  void dynamics(const Vector& x, double p, double q, const Vector& k, double omega_frame,
                bool limiters, Vector& dx) const override;
  Eigen::Vector3d outputs(const Vector& x, const Vector& k) const override;
  Vector initial_guess(const Vector& k) const override;
  StateSpace linear(const Vector& x0, double p0, double q0, const Vector& k) const override;

  const DroopInverter& inverter() const { return inv_; }

 private:
  DroopInverter inv_;
  int bus_;
  double scale_;  // s_base / rating
};

// Classical machine (constant internal voltage) with a governor diagram
// mapping omega to mechanical power. Plumbing model for power plants.
struct SwingGenerator {
  std::string id = "gen";
  double h = 5.0;        // s, inertia constant
  double damping = 1.0;  // pu power per pu speed
  double p_ref = 0.0;    // pu on machine base
  double v_set = 1.0;
  double rating = 1.0;   // VA
  double omega_base = 2.0 * 3.14159265358979323846 * 50.0;
  BlockDiagram governor;  // input omega deviation, output p_m; may be empty
};

class SwingProsumer : public DynamicProsumer {
 public:
  SwingProsumer(SwingGenerator gen, int bus, double s_base);

  const std::string& id() const override { return gen_.id; }
  int bus() const override { return bus_; }
  int states() const override { return 2 + static_cast<int>(gov_states_); }
  std::vector<std::string> state_names() const override;
  int theta_state() const override { return 0; }
  std::vector<std::string> param_names() const override;
  Vector nominal() const override;
  Vector lower() const override;
  Vector upper() const override;
  void dynamics(const Vector& x, double p, double q, const Vector& k, double omega_frame,
                bool limiters, Vector& dx) const override;
  Eigen::Vector3d outputs(const Vector& x, const Vector& k) const override;
  Vector initial_guess(const Vector& k) const override;
  StateSpace linear(const Vector& x0, double p0, double q0, const Vector& k) const override;

 private:
  SwingGenerator gen_;
  int bus_;
  double scale_;
  bool has_gov_;
  ParamSystem gov_;
  Eigen::Index gov_states_ = 0;
};

struct StaticProsumer {
  std::string id;
  int bus = 0;
  double p_c = 0.0;  // pu injection
  double q_c = 0.0;
  bool disturb_p = false;
  bool disturb_q = false;
};

// Nonlinear coupled prosumer/network model: x' = f(x, z, w, K), 0 = h(x, z, w),
// with z the static-bus phasors and w the selected static infeeds.
class CoupledSystem {
 public:
  CoupledSystem(Network net, std::vector<std::shared_ptr<const DynamicProsumer>> dynamic,
                std::vector<StaticProsumer> statics);

  const Network& network() const { return net_; }
  const std::vector<std::shared_ptr<const DynamicProsumer>>& dynamic() const { return dyn_; }
  const std::vector<StaticProsumer>& statics() const { return statics_; }

  int states() const { return n_x_; }
  int disturbances() const { return static_cast<int>(w_names_.size()); }
  const std::vector<std::string>& disturbance_names() const { return w_names_; }
  const std::vector<int>& static_buses() const { return static_buses_; }
  Eigen::Index state_offset(int prosumer) const { return offsets_[prosumer]; }

  // Global parameters, sorted by (prosumer id, local name).
  const std::vector<std::string>& param_names() const { return names_; }
  const Vector& nominal() const { return nominal_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Vector prosumer_params(int prosumer, const Vector& k) const;

  // Base infeed per bus (sum of static prosumers) plus disturbance w.
  Injections static_infeed(const Vector& w) const;

  // Bus phasors from prosumer outputs and static-bus unknowns z = (theta_s, V_s).
  void phasors(const Vector& x, const Vector& z, const Vector& k, Vector& v, Vector& theta) const;

  // h(x, z, w): static-bus power balance (2 per static bus).
  Vector algebraic_residual(const Vector& x, const Vector& z, const Vector& w, const Vector& k) const;
  // f(x, z, K) with network injections at dynamic buses.
  Vector derivative(const Vector& x, const Vector& z, const Vector& k, double omega_frame,
                    bool limiters) const;

  // Newton solve of h for z, warm-started from z0; residual below tol.
  Vector solve_algebraic(const Vector& x, const Vector& w, const Vector& k, const Vector& z0,
                         double tol = 1e-10, int max_iter = 30) const;

  // Steady state with common frequency, reference angle of the first dynamic
  // prosumer fixed to zero. Warm start from `guess` when given.
  OperatingPoint solve_operating_point(const Vector& k, const OperatingPoint* guess = nullptr,
                                       int max_iter = 50) const;

  Vector z_of(const OperatingPoint& op) const;

 private:
  Network net_;
  std::vector<std::shared_ptr<const DynamicProsumer>> dyn_;
  std::vector<StaticProsumer> statics_;
  std::vector<int> bus_owner_;  // dynamic prosumer index per bus, -1 for static
  std::vector<int> static_buses_;
  std::vector<Eigen::Index> offsets_;
  int n_x_ = 0;
  std::vector<std::string> names_;
  Vector nominal_, lower_, upper_;
  std::vector<std::vector<int>> param_map_;  // prosumer -> indices into global K
  std::vector<std::string> w_names_;
  std::vector<std::pair<int, bool>> w_channels_;  // (static prosumer, reactive)
};

// Throws UnmodeledBus on bus/prosumer mismatches.
CoupledSystem build_coupled_system(Network net,
                                   std::vector<std::shared_ptr<const DynamicProsumer>> dynamic,
                                   std::vector<StaticProsumer> statics);

struct LinearizeOptions {
  bool power_outputs = false;  // append P_p per dynamic prosumer after the omegas
  bool resolve_operating_point = true;
};

// Linear model (A~, B~, C~, D~) from w to y = (omega_1..omega_N [, P_1..P_N]).
// With resolve_operating_point the steady state is re-solved for each K,
// warm-started from `op`; otherwise `op` is used for every K.
ParamSystem linearize(const CoupledSystem& sys, const OperatingPoint& op,
                      const LinearizeOptions& opts = {});

// Linearization at a fixed operating point and parameter vector.
StateSpace linearize_at(const CoupledSystem& sys, const OperatingPoint& op, const Vector& k,
                        bool power_outputs = false);

// Projects out the single zero eigenvalue of A(k_ref) using the orthogonal
// complement of its null vector. Throws MultipleZeroModes / NoZeroMode.
struct ZeroModeReduction {
  ParamSystem reduced;
  Vector null_vector;
  Matrix basis;  // n x (n-1), orthonormal columns
};
ZeroModeReduction remove_zero_mode(const ParamSystem& sys, const Vector& k_ref,
                                   double zero_tol = 1e-8);

}  // namespace hinftune
