#include "hinftune/gridmodel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <set>
#include <tuple>

#include <spdlog/spdlog.h>

#include "hinftune/error.hpp"

namespace hinftune {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); }

bool connected(const Matrix& g, const Matrix& b) {
  const Eigen::Index n = g.rows();
  if (n == 0) return false;
  std::vector<bool> seen(n, false);
  std::vector<Eigen::Index> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const Eigen::Index i = stack.back();
    stack.pop_back();
    for (Eigen::Index j = 0; j < n; ++j)
      if (!seen[j] && (g(i, j) != 0.0 || b(i, j) != 0.0)) {
        seen[j] = true;
        stack.push_back(j);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
}

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Network::Network(Matrix g, Matrix b, std::vector<BusKind> kinds, double s_base)
    : g_(std::move(g)), b_(std::move(b)), kinds_(std::move(kinds)), s_base_(s_base) {
  const Eigen::Index n = g_.rows();
  if (n == 0 || g_.cols() != n || b_.rows() != n || b_.cols() != n)
    invalid("conductance and susceptance matrices must be square of equal size");
  if (static_cast<Eigen::Index>(kinds_.size()) != n) invalid("one bus kind per bus required");
  if (!g_.allFinite() || !b_.allFinite()) invalid("network matrices must be finite");
  const double scale = std::max({1.0, g_.cwiseAbs().maxCoeff(), b_.cwiseAbs().maxCoeff()});
  if ((g_ - g_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale ||
      (b_ - b_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    invalid("network matrices must be symmetric");
  if (!connected(g_, b_)) invalid("network graph is not connected");
  if (!(s_base_ > 0.0)) invalid("power base must be positive");
}

Network Network::from_branches(int n_buses, const std::vector<Branch>& branches,
                               std::vector<BusKind> kinds, double s_base) {
  if (n_buses <= 0) invalid("network needs at least one bus");
  using C = std::complex<double>;
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n_buses, n_buses);
  for (const auto& br : branches) {
    if (br.from < 0 || br.from >= n_buses || br.to < 0 || br.to >= n_buses || br.from == br.to)
      invalid("branch endpoints out of range");
    const C z(br.r, br.x);
    if (std::abs(z) == 0.0) invalid("branch with zero impedance");
    const C ys = 1.0 / z, ysh(0.0, 0.5 * br.b_shunt);
    y(br.from, br.from) += ys + ysh;
    y(br.to, br.to) += ys + ysh;
    y(br.from, br.to) -= ys;
    y(br.to, br.from) -= ys;
  }
  return Network(y.real(), y.imag(), std::move(kinds), s_base);
}

Injections power_injections(const Network& net, const Vector& v, const Vector& theta) {
  const int n = net.buses();
  if (v.size() != n || theta.size() != n) invalid("phasor vectors do not match bus count");
  Injections out{Vector::Zero(n), Vector::Zero(n)};
  const Matrix& g = net.g();
  const Matrix& b = net.b();
  for (int i = 0; i < n; ++i) {
    double p = 0.0, q = 0.0;
    for (int j = 0; j < n; ++j) {
      if (g(i, j) == 0.0 && b(i, j) == 0.0) continue;
      const double d = theta(i) - theta(j), c = std::cos(d), s = std::sin(d);
      const double vv = v(i) * v(j);
      p += vv * (g(i, j) * c + b(i, j) * s);
      q += vv * (g(i, j) * s - b(i, j) * c);
    }
    out.p(i) = p;
    out.q(i) = q;
  }
  return out;
}

Vector power_flow_residual(const Network& net, const Vector& v, const Vector& theta,
                           const Vector& p, const Vector& q) {
  const int n = net.buses();
  if (p.size() != n || q.size() != n) invalid("injection vectors do not match bus count");
  const Injections inj = power_injections(net, v, theta);
  Vector r(2 * n);
  r << inj.p - p, inj.q - q;
  return r;
}

Matrix power_flow_jacobian(const Network& net, const Vector& v, const Vector& theta) {
  const int n = net.buses();
  const Matrix& g = net.g();
  const Matrix& b = net.b();
  Matrix j = Matrix::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      if (k == i || (g(i, k) == 0.0 && b(i, k) == 0.0)) continue;
      const double d = theta(i) - theta(k), c = std::cos(d), s = std::sin(d);
      const double gs_bc = g(i, k) * s - b(i, k) * c;
      const double gc_bs = g(i, k) * c + b(i, k) * s;
      // dP_i, dQ_i with respect to theta_k, V_k
      j(i, k) = v(i) * v(k) * gs_bc;
      j(n + i, k) = -v(i) * v(k) * gc_bs;
      j(i, n + k) = v(i) * gc_bs;
      j(n + i, n + k) = v(i) * gs_bc;
      // diagonal contributions
      j(i, i) -= v(i) * v(k) * gs_bc;
      j(n + i, i) += v(i) * v(k) * gc_bs;
      j(i, n + i) += v(k) * gc_bs;
      j(n + i, n + i) += v(k) * gs_bc;
    }
    j(i, n + i) += 2.0 * v(i) * g(i, i);
    j(n + i, n + i) -= 2.0 * v(i) * b(i, i);
  }
  return j;
}

OperatingPoint solve_power_flow(const Network& net, const Vector& p, const Vector& q, int slack_bus,
                                double v_slack, int max_iter) {
  const int n = net.buses();
  if (slack_bus < 0 || slack_bus >= n) invalid("slack bus out of range");
  if (p.size() != n || q.size() != n) invalid("injection vectors do not match bus count");
  std::vector<int> pq;
  for (int i = 0; i < n; ++i)
    if (i != slack_bus) pq.push_back(i);
  const int m = static_cast<int>(pq.size());
  Vector v = Vector::Ones(n), th = Vector::Zero(n);
  v(slack_bus) = v_slack;

  auto mismatch = [&]() {
    const Vector r = power_flow_residual(net, v, th, p, q);
    Vector f(2 * m);
    for (int a = 0; a < m; ++a) {
      f(a) = r(pq[a]);
      f(m + a) = r(n + pq[a]);
    }
    return f;
  };
  Vector f = mismatch();
  int it = 0;
  while (!(max_abs(f) < 1e-10)) {
    if (it++ >= max_iter || !f.allFinite())
      throw Error(ErrorKind::NonConvergence,
                  "power flow did not converge in " + std::to_string(max_iter) + " iterations");
    const Matrix jf = power_flow_jacobian(net, v, th);
    Matrix j(2 * m, 2 * m);
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < m; ++c) {
        j(a, c) = jf(pq[a], pq[c]);
        j(a, m + c) = jf(pq[a], n + pq[c]);
        j(m + a, c) = jf(n + pq[a], pq[c]);
        j(m + a, m + c) = jf(n + pq[a], n + pq[c]);
      }
    Eigen::PartialPivLU<Matrix> lu(j);
    if (!(lu.rcond() >= 1e-14))
      throw Error(ErrorKind::NonConvergence, "singular power flow Jacobian");
    const Vector dx = lu.solve(f);
    for (int a = 0; a < m; ++a) {
      th(pq[a]) -= dx(a);
      v(pq[a]) -= dx(m + a);
    }
    f = mismatch();
  }
  OperatingPoint op;
  op.v = v;
  op.theta = th;
  const Injections inj = power_injections(net, v, th);
  op.p = inj.p;
  op.q = inj.q;
  return op;
}

// ---------------------------------------------------------------------------

DroopProsumer::DroopProsumer(DroopInverter inv, int bus, double s_base)
    : inv_(std::move(inv)), bus_(bus), scale_(s_base / inv_.rating) {
  inv_.validate();
}

std::vector<std::string> DroopProsumer::state_names() const { return {"omega", "theta", "V"}; }
std::vector<std::string> DroopProsumer::param_names() const { return {"K_P", "K_Q", "T_f", "T_v"}; }

Vector DroopProsumer::nominal() const {
  Vector k(4);
  k << inv_.k_p, inv_.k_q, inv_.t_f, inv_.t_v;
  return k;
}
Vector DroopProsumer::lower() const {
  Vector k(4);
  k << inv_.k_p_bounds.lower, inv_.k_q_bounds.lower, inv_.t_f_bounds.lower, inv_.t_v_bounds.lower;
  return k;
}
Vector DroopProsumer::upper() const {
  Vector k(4);
  k << inv_.k_p_bounds.upper, inv_.k_q_bounds.upper, inv_.t_f_bounds.upper, inv_.t_v_bounds.upper;
  return k;
}

void DroopProsumer::dynamics(const Vector& x, double p, double q, const Vector& k,
                             double omega_frame, bool limiters, Vector& dx) const {
  double w_set = inv_.omega_c - k(0) * scale_ * p;
  double v_set = inv_.v_c - k(1) * scale_ * q;
  if (limiters) {
    w_set = std::clamp(w_set, inv_.omega_min, inv_.omega_max);
    v_set = std::clamp(v_set, inv_.v_min, inv_.v_max);
  }
  dx.resize(3);
  dx(0) = (w_set - x(0)) / k(2);
  dx(1) = inv_.omega_base * (x(0) - omega_frame);
  dx(2) = (v_set - x(2)) / k(3);
}

Eigen::Vector3d DroopProsumer::outputs(const Vector& x, const Vector&) const {
  return {x(1), x(2), x(0)};
}

Vector DroopProsumer::initial_guess(const Vector&) const {
  Vector x(3);
  x << inv_.omega_c, 0.0, inv_.v_c;
  return x;
}

StateSpace DroopProsumer::linear(const Vector&, double, double, const Vector& k) const {
  const StateSpace s = droop_inverter_model(inv_)(k);
  return StateSpace(s.a(), s.b() * scale_, s.c(), s.d());
}

// ---------------------------------------------------------------------------

SwingProsumer::SwingProsumer(SwingGenerator gen, int bus, double s_base)
    : gen_(std::move(gen)), bus_(bus), scale_(s_base / gen_.rating) {
  if (gen_.id.empty() || gen_.id.find('.') != std::string::npos)
    invalid("generator id must be nonempty without '.'");
  if (!(gen_.h > 0.0 && gen_.damping >= 0.0 && gen_.rating > 0.0 && gen_.v_set > 0.0))
    invalid("generator '" + gen_.id + "' needs H > 0, D >= 0, rating > 0, V > 0");
  has_gov_ = !gen_.governor.blocks.empty();
  if (has_gov_) {
    if (gen_.governor.inputs.size() != 1 || gen_.governor.outputs.size() != 1)
      invalid("governor diagram must be SISO");
    gov_ = assemble(gen_.governor, "governor.");
    gov_states_ = gov_(nominal_parameters(gen_.governor)).states();
  }
}

std::vector<std::string> SwingProsumer::state_names() const {
  std::vector<std::string> s = {"theta", "omega"};
  for (Eigen::Index i = 0; i < gov_states_; ++i) s.push_back("governor" + std::to_string(i));
  return s;
}

std::vector<std::string> SwingProsumer::param_names() const {
  return has_gov_ ? gov_.names() : std::vector<std::string>{};
}
Vector SwingProsumer::nominal() const {
  return has_gov_ ? nominal_parameters(gen_.governor) : Vector(0);
}
Vector SwingProsumer::lower() const { return has_gov_ ? gov_.lower() : Vector(0); }
Vector SwingProsumer::upper() const { return has_gov_ ? gov_.upper() : Vector(0); }

void SwingProsumer::dynamics(const Vector& x, double p, double, const Vector& k, double omega_frame,
                             bool limiters, Vector& dx) const {
  dx.resize(states());
  double pm = gen_.p_ref;
  if (has_gov_) {
    Vector r(1), dg, yg;
    r << x(1) - 1.0;
    const Vector xg = x.tail(gov_states_);
    if (limiters) {
      DiagramDynamics dyn(gen_.governor, k);
      dyn.evaluate(xg, r, dg, yg);
    } else {
      const StateSpace g = gov_(k);
      dg = g.a() * xg + g.b() * r;
      yg = g.c() * xg + g.d() * r;
    }
    pm += yg(0);
    dx.tail(gov_states_) = dg;
  }
  dx(0) = gen_.omega_base * (x(1) - omega_frame);
  dx(1) = (pm - scale_ * p - gen_.damping * (x(1) - 1.0)) / (2.0 * gen_.h);
}

Eigen::Vector3d SwingProsumer::outputs(const Vector& x, const Vector&) const {
  return {x(0), gen_.v_set, x(1)};
}

Vector SwingProsumer::initial_guess(const Vector&) const {
  Vector x = Vector::Zero(states());
  x(1) = 1.0;
  return x;
}

StateSpace SwingProsumer::linear(const Vector&, double, double, const Vector& k) const {
  const Eigen::Index n = states();
  Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, 2), c = Matrix::Zero(3, n);
  const double m = 2.0 * gen_.h;
  a(0, 1) = gen_.omega_base;
  a(1, 1) = -gen_.damping / m;
  b(1, 0) = -scale_ / m;
  if (has_gov_) {
    const StateSpace g = gov_(k);
    a(1, 1) += g.d()(0, 0) / m;
    a.block(1, 2, 1, gov_states_) = g.c() / m;
    a.block(2, 1, gov_states_, 1) = g.b();
    a.block(2, 2, gov_states_, gov_states_) = g.a();
  }
  c(0, 0) = 1.0;
  c(2, 1) = 1.0;
  return StateSpace(a, b, c, Matrix::Zero(3, 2));
}

// ---------------------------------------------------------------------------

CoupledSystem::CoupledSystem(Network net, std::vector<std::shared_ptr<const DynamicProsumer>> dynamic,
                             std::vector<StaticProsumer> statics)
    : net_(std::move(net)), dyn_(std::move(dynamic)), statics_(std::move(statics)) {
  const int nb = net_.buses();
  bus_owner_.assign(nb, -1);
  std::set<std::string> ids;
  if (dyn_.empty()) invalid("coupled system needs at least one dynamic prosumer");
  for (std::size_t i = 0; i < dyn_.size(); ++i) {
    const auto& d = *dyn_[i];
    if (!ids.insert(d.id()).second) invalid("duplicate prosumer id '" + d.id() + "'");
    if (d.bus() < 0 || d.bus() >= nb)
      throw Error(ErrorKind::UnmodeledBus, "prosumer '" + d.id() + "' refers to a missing bus");
    if (net_.kinds()[d.bus()] != BusKind::Dynamic)
      throw Error(ErrorKind::UnmodeledBus,
                  "prosumer '" + d.id() + "' sits on static bus " + std::to_string(d.bus()));
    if (bus_owner_[d.bus()] != -1)
      throw Error(ErrorKind::UnmodeledBus, "two dynamic prosumers on bus " + std::to_string(d.bus()));
    bus_owner_[d.bus()] = static_cast<int>(i);
    offsets_.push_back(n_x_);
    n_x_ += d.states();
  }
  for (int b = 0; b < nb; ++b) {
    if (net_.kinds()[b] == BusKind::Dynamic && bus_owner_[b] == -1)
      throw Error(ErrorKind::UnmodeledBus, "dynamic bus " + std::to_string(b) + " has no prosumer model");
    if (net_.kinds()[b] == BusKind::Static) static_buses_.push_back(b);
  }
  for (std::size_t i = 0; i < statics_.size(); ++i) {
    const auto& s = statics_[i];
    if (!ids.insert(s.id).second) invalid("duplicate prosumer id '" + s.id + "'");
    if (s.bus < 0 || s.bus >= nb || net_.kinds()[s.bus] != BusKind::Static)
      throw Error(ErrorKind::UnmodeledBus, "static prosumer '" + s.id + "' needs a static bus");
    if (!std::isfinite(s.p_c) || !std::isfinite(s.q_c)) invalid("static infeed must be finite");
    if (s.disturb_p) {
      w_names_.push_back(s.id + ".P");
      w_channels_.push_back({static_cast<int>(i), false});
    }
    if (s.disturb_q) {
      w_names_.push_back(s.id + ".Q");
      w_channels_.push_back({static_cast<int>(i), true});
    }
  }
  if (w_names_.empty()) invalid("disturbance selection is empty");

  struct Entry {
    std::string prosumer, local;
    int owner, local_index;
    double nominal, lo, hi;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < dyn_.size(); ++i) {
    const auto names = dyn_[i]->param_names();
    const Vector nom = dyn_[i]->nominal(), lo = dyn_[i]->lower(), hi = dyn_[i]->upper();
    for (std::size_t j = 0; j < names.size(); ++j)
      entries.push_back({dyn_[i]->id(), names[j], static_cast<int>(i), static_cast<int>(j),
                         nom(j), lo(j), hi(j)});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.prosumer, a.local) < std::tie(b.prosumer, b.local);
  });
  nominal_.resize(entries.size());
  lower_.resize(entries.size());
  upper_.resize(entries.size());
  param_map_.assign(dyn_.size(), {});
  for (std::size_t i = 0; i < dyn_.size(); ++i) param_map_[i].assign(dyn_[i]->param_names().size(), -1);
  for (std::size_t g = 0; g < entries.size(); ++g) {
    const auto& e = entries[g];
    names_.push_back(e.prosumer + "." + e.local);
    nominal_(g) = e.nominal;
    lower_(g) = e.lo;
    upper_(g) = e.hi;
    param_map_[e.owner][e.local_index] = static_cast<int>(g);
  }
}

CoupledSystem build_coupled_system(Network net,
                                   std::vector<std::shared_ptr<const DynamicProsumer>> dynamic,
                                   std::vector<StaticProsumer> statics) {
  return CoupledSystem(std::move(net), std::move(dynamic), std::move(statics));
}

Vector CoupledSystem::prosumer_params(int prosumer, const Vector& k) const {
  if (k.size() != static_cast<Eigen::Index>(names_.size()))
    invalid("parameter vector has length " + std::to_string(k.size()) + ", expected " +
            std::to_string(names_.size()));
  const auto& map = param_map_[prosumer];
  Vector out(map.size());
  for (std::size_t j = 0; j < map.size(); ++j) out(j) = k(map[j]);
  return out;
}

Injections CoupledSystem::static_infeed(const Vector& w) const {
  const int nb = net_.buses();
  if (w.size() != disturbances()) invalid("disturbance vector has wrong length");
  Injections inj{Vector::Zero(nb), Vector::Zero(nb)};
  for (const auto& s : statics_) {
    inj.p(s.bus) += s.p_c;
    inj.q(s.bus) += s.q_c;
  }
  for (std::size_t c = 0; c < w_channels_.size(); ++c) {
    const auto& s = statics_[w_channels_[c].first];
    (w_channels_[c].second ? inj.q : inj.p)(s.bus) += w(c);
  }
  return inj;
}

void CoupledSystem::phasors(const Vector& x, const Vector& z, const Vector& k, Vector& v,
                            Vector& theta) const {
  const int nb = net_.buses();
  const Eigen::Index ns = static_buses_.size();
  v.resize(nb);
  theta.resize(nb);
  for (std::size_t i = 0; i < dyn_.size(); ++i) {
    const auto& d = *dyn_[i];
    const Eigen::Vector3d o = d.outputs(x.segment(offsets_[i], d.states()), prosumer_params(i, k));
    theta(d.bus()) = o(0);
    v(d.bus()) = o(1);
  }
  for (Eigen::Index s = 0; s < ns; ++s) {
    theta(static_buses_[s]) = z(s);
    v(static_buses_[s]) = z(ns + s);
  }
}

Vector CoupledSystem::algebraic_residual(const Vector& x, const Vector& z, const Vector& w,
                                         const Vector& k) const {
  Vector v, th;
  phasors(x, z, k, v, th);
  const Injections inj = power_injections(net_, v, th);
  const Injections in = static_infeed(w);
  const Eigen::Index ns = static_buses_.size();
  Vector h(2 * ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    const int b = static_buses_[s];
    h(s) = inj.p(b) - in.p(b);
    h(ns + s) = inj.q(b) - in.q(b);
  }
  return h;
}

Vector CoupledSystem::derivative(const Vector& x, const Vector& z, const Vector& k,
                                 double omega_frame, bool limiters) const {
  Vector v, th;
  phasors(x, z, k, v, th);
  const Injections inj = power_injections(net_, v, th);
  Vector dx(n_x_), di;
  for (std::size_t i = 0; i < dyn_.size(); ++i) {
    const auto& d = *dyn_[i];
    d.dynamics(x.segment(offsets_[i], d.states()), inj.p(d.bus()), inj.q(d.bus()),
               prosumer_params(i, k), omega_frame, limiters, di);
    dx.segment(offsets_[i], d.states()) = di;
  }
  return dx;
}

Vector CoupledSystem::solve_algebraic(const Vector& x, const Vector& w, const Vector& k,
                                      const Vector& z0, double tol, int max_iter) const {
  const Eigen::Index ns = static_buses_.size();
  if (ns == 0) return Vector(0);
  Vector z = z0;
  Vector h = algebraic_residual(x, z, w, k);
  int it = 0;
  while (!(max_abs(h) < tol)) {
    if (it++ >= max_iter || !h.allFinite())
      throw Error(ErrorKind::AlgebraicNewtonFailure, "network equations did not converge");
    Vector v, th;
    phasors(x, z, k, v, th);
    const Matrix jf = power_flow_jacobian(net_, v, th);
    const int nb = net_.buses();
    Matrix j(2 * ns, 2 * ns);
    for (Eigen::Index a = 0; a < ns; ++a)
      for (Eigen::Index c = 0; c < ns; ++c) {
        const int ba = static_buses_[a], bc = static_buses_[c];
        j(a, c) = jf(ba, bc);
        j(a, ns + c) = jf(ba, nb + bc);
        j(ns + a, c) = jf(nb + ba, bc);
        j(ns + a, ns + c) = jf(nb + ba, nb + bc);
      }
    Eigen::PartialPivLU<Matrix> lu(j);
    if (!(lu.rcond() >= 1e-14))
      throw Error(ErrorKind::AlgebraicNewtonFailure, "singular network Jacobian");
    z -= lu.solve(h);
    h = algebraic_residual(x, z, w, k);
  }
  return z;
}

Vector CoupledSystem::z_of(const OperatingPoint& op) const {
  const Eigen::Index ns = static_buses_.size();
  Vector z(2 * ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    z(s) = op.theta(static_buses_[s]);
    z(ns + s) = op.v(static_buses_[s]);
  }
  return z;
}

OperatingPoint CoupledSystem::solve_operating_point(const Vector& k, const OperatingPoint* guess,
                                                    int max_iter) const {
  const Eigen::Index ns = static_buses_.size();
  const Eigen::Index n = n_x_, nz = 2 * ns, nu = n + nz + 1;
  const Vector w0 = Vector::Zero(disturbances());
  const Eigen::Index ref = offsets_[0] + dyn_[0]->theta_state();

  Vector u(nu);
  if (guess && guess->x0.size() == n) {
    u << guess->x0, z_of(*guess), guess->omega_frame;
  } else {
    for (std::size_t i = 0; i < dyn_.size(); ++i)
      u.segment(offsets_[i], dyn_[i]->states()) = dyn_[i]->initial_guess(prosumer_params(i, k));
    for (Eigen::Index s = 0; s < ns; ++s) {
      u(n + s) = 0.0;
      u(n + ns + s) = 1.0;
    }
    u(nu - 1) = 1.0;
  }

  auto residual = [&](const Vector& uu) {
    Vector f(nu);
    const Vector x = uu.head(n), z = uu.segment(n, nz);
    f.head(n) = derivative(x, z, k, uu(nu - 1), false);
    f.segment(n, nz) = algebraic_residual(x, z, w0, k);
    f(nu - 1) = x(ref);
    return f;
  };

  Vector f = residual(u);
  double fnorm = max_abs(f);
  for (int it = 0; it < max_iter && fnorm >= 1e-14; ++it) {
    Matrix j(nu, nu);
    for (Eigen::Index c = 0; c < nu; ++c) {
      Vector up = u;
      const double h = 1e-7 * std::max(1.0, std::abs(u(c)));
      up(c) += h;
      j.col(c) = (residual(up) - f) / h;
    }
    Eigen::PartialPivLU<Matrix> lu(j);
    if (!(lu.rcond() >= 1e-15)) throw Error(ErrorKind::NonConvergence, "singular steady-state Jacobian");
    const Vector step = lu.solve(f);
    double lambda = 1.0, fn_norm = kInf;
    Vector un, fn;
    for (int ls = 0; ls < 30; ++ls) {
      un = u - lambda * step;
      fn = residual(un);
      fn_norm = max_abs(fn);
      if (fn_norm < fnorm) break;
      lambda *= 0.5;
    }
    if (!(fn_norm < fnorm)) break;
    const bool stalled = fnorm < 1e-10 && fn_norm > 0.5 * fnorm;
    u = un;
    f = fn;
    fnorm = fn_norm;
    if (stalled) break;
  }
  if (!(fnorm < 1e-10)) throw Error(ErrorKind::NonConvergence, "steady state did not converge");

  OperatingPoint op;
  op.x0 = u.head(n);
  op.omega_frame = u(nu - 1);
  op.k = k;
  phasors(op.x0, u.segment(n, nz), k, op.v, op.theta);
  const Injections inj = power_injections(net_, op.v, op.theta);
  op.p = inj.p;
  op.q = inj.q;
  return op;
}

// ---------------------------------------------------------------------------

StateSpace linearize_at(const CoupledSystem& sys, const OperatingPoint& op, const Vector& k,
                        bool power_outputs) {
  const auto& dyn = sys.dynamic();
  const auto& net = sys.network();
  const int nb = net.buses();
  const Eigen::Index nd = dyn.size();
  const auto& sb = sys.static_buses();
  const Eigen::Index ns = sb.size();
  const Eigen::Index n = sys.states(), nw = sys.disturbances();

  Matrix a = Matrix::Zero(n, n), bpq = Matrix::Zero(n, 2 * nd), ctv = Matrix::Zero(2 * nd, n);
  Matrix cw = Matrix::Zero(nd, n), dw = Matrix::Zero(nd, 2 * nd);
  for (Eigen::Index i = 0; i < nd; ++i) {
    const auto& d = *dyn[i];
    const Eigen::Index off = sys.state_offset(static_cast<int>(i)), ni = d.states();
    const StateSpace l = d.linear(op.x0.segment(off, ni), op.p(d.bus()), op.q(d.bus()),
                                  sys.prosumer_params(static_cast<int>(i), k));
    if (l.d().topRows(2).cwiseAbs().maxCoeff() != 0.0)
      invalid("prosumer '" + d.id() + "' has direct feedthrough to its bus phasor");
    a.block(off, off, ni, ni) = l.a();
    bpq.block(off, 2 * i, ni, 2) = l.b();
    ctv.block(2 * i, off, 2, ni) = l.c().topRows(2);
    cw.block(i, off, 1, ni) = l.c().row(2);
    dw.block(i, 2 * i, 1, 2) = l.d().row(2);
  }

  const Matrix jf = power_flow_jacobian(net, op.v, op.theta);
  // Row/column maps: dynamic (P_i, Q_i) / (theta_i, V_i) interleaved per
  // prosumer, static (P_s.., Q_s..) / (theta_s.., V_s..).
  std::vector<int> rd(2 * nd), cd(2 * nd), rs(2 * ns), cs(2 * ns);
  for (Eigen::Index i = 0; i < nd; ++i) {
    const int b = dyn[i]->bus();
    rd[2 * i] = b;
    rd[2 * i + 1] = nb + b;
    cd[2 * i] = b;
    cd[2 * i + 1] = nb + b;
  }
  for (Eigen::Index s = 0; s < ns; ++s) {
    rs[s] = sb[s];
    rs[ns + s] = nb + sb[s];
    cs[s] = sb[s];
    cs[ns + s] = nb + sb[s];
  }
  auto sub = [&](const std::vector<int>& r, const std::vector<int>& c) {
    Matrix m(r.size(), c.size());
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < c.size(); ++j) m(i, j) = jf(r[i], c[j]);
    return m;
  };
  const Matrix jdd = sub(rd, cd), jds = sub(rd, cs), jsd = sub(rs, cd), jss = sub(rs, cs);

  Matrix e = Matrix::Zero(2 * ns, nw);
  {
    const Vector unit_w = Vector::Zero(nw);
    for (Eigen::Index c = 0; c < nw; ++c) {
      Vector wc = unit_w;
      wc(c) = 1.0;
      const Injections base = sys.static_infeed(unit_w), pert = sys.static_infeed(wc);
      for (Eigen::Index s = 0; s < ns; ++s) {
        e(s, c) = pert.p(sb[s]) - base.p(sb[s]);
        e(ns + s, c) = pert.q(sb[s]) - base.q(sb[s]);
      }
    }
  }

  Matrix m = jdd * ctv, nmat = Matrix::Zero(2 * nd, nw);
  if (ns > 0) {
    Eigen::PartialPivLU<Matrix> lu(jss);
    const double scale = std::max(1.0, jss.cwiseAbs().maxCoeff());
    if (!(lu.rcond() >= 1e-12 / scale))
      throw Error(ErrorKind::SingularAlgebraicJacobian,
                  "algebraic Jacobian is singular at the operating point");
    m -= jds * lu.solve(jsd * ctv);
    nmat = jds * lu.solve(e);
  }

  const Matrix a_t = a + bpq * m;
  const Matrix b_t = bpq * nmat;
  const Eigen::Index ny = power_outputs ? 2 * nd : nd;
  Matrix c_t(ny, n), d_t(ny, nw);
  c_t.topRows(nd) = cw + dw * m;
  d_t.topRows(nd) = dw * nmat;
  if (power_outputs) {
    for (Eigen::Index i = 0; i < nd; ++i) {
      c_t.row(nd + i) = m.row(2 * i);
      d_t.row(nd + i) = nmat.row(2 * i);
    }
  }
  return StateSpace(a_t, b_t, c_t, d_t);
}

ParamSystem linearize(const CoupledSystem& sys, const OperatingPoint& op, const LinearizeOptions& opts) {
  std::vector<std::string> names = sys.param_names();
  const bool resolve = opts.resolve_operating_point, power = opts.power_outputs;
  // The evaluator shares ownership of copies so the ParamSystem is self-contained.
  auto owned = std::make_shared<const CoupledSystem>(sys);
  auto base = std::make_shared<const OperatingPoint>(op);
  return ParamSystem(std::move(names), sys.lower(), sys.upper(),
                     [owned, base, resolve, power](const Vector& k) {
                       if (!resolve || (base->k.size() == k.size() && base->k == k))
                         return linearize_at(*owned, *base, k, power);
                       const OperatingPoint opk = owned->solve_operating_point(k, base.get());
                       return linearize_at(*owned, opk, k, power);
                     });
}

ZeroModeReduction remove_zero_mode(const ParamSystem& sys, const Vector& k_ref, double zero_tol) {
  const StateSpace full = sys(k_ref);
  const Eigen::Index n = full.states();
  if (n == 0) throw Error(ErrorKind::NoZeroMode, "system has no states");
  const PoleSet ps = poles(full);
  int zeros = 0;
  for (const auto& p : ps.poles)
    if (std::abs(p) < zero_tol) ++zeros;
  if (zeros == 0) throw Error(ErrorKind::NoZeroMode, "no eigenvalue near zero");
  if (zeros > 1)
    throw Error(ErrorKind::MultipleZeroModes,
                std::to_string(zeros) + " eigenvalues near zero; islanded sub-network?");

  Eigen::JacobiSVD<Matrix> svd(full.a(), Eigen::ComputeFullV);
  Vector v = svd.matrixV().col(n - 1);
  Eigen::Index imax;
  v.cwiseAbs().maxCoeff(&imax);
  if (v(imax) < 0.0) v = -v;
  const Matrix q = Eigen::HouseholderQR<Matrix>(v).householderQ();
  const Matrix u = q.rightCols(n - 1);

  const double cv = (full.c() * v).norm();
  if (cv > 1e-8 * std::max(1.0, full.c().norm()))
    spdlog::warn("output observes the removed zero mode (|C v| = {:.3g})", cv);

  ZeroModeReduction out;
  out.null_vector = v;
  out.basis = u;
  out.reduced = ParamSystem(sys.names(), sys.lower(), sys.upper(), [sys, u](const Vector& k) {
    const StateSpace s = sys(k);
    return StateSpace(u.transpose() * s.a() * u, u.transpose() * s.b(), s.c() * u, s.d());
  });
  return out;
}

}  // namespace hinftune
