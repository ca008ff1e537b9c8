#include "hinftune/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace hinftune {

namespace {

int sample_count(const SimScenario& scen) {
  return static_cast<int>(std::llround(scen.horizon / scen.dt));
}

Vector input_at(const SimScenario& scen, double t, Eigen::Index n) {
  if (t >= scen.step_time - 1e-9 * scen.dt) return scen.w_step;
  return Vector::Zero(n);
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

Trajectory select(Trajectory t, const std::vector<int>& outputs) {
  if (outputs.empty()) return t;
  Trajectory out;
  out.time = std::move(t.time);
  out.values.resize(t.values.rows(), static_cast<Eigen::Index>(outputs.size()));
  for (std::size_t c = 0; c < outputs.size(); ++c) {
    const int src = outputs[c];
    if (src < 0 || src >= t.values.cols())
      throw Error(ErrorKind::InvalidArgument, "output selection out of range");
    out.channels.push_back(t.channels[src]);
    out.values.col(static_cast<Eigen::Index>(c)) = t.values.col(src);
  }
  return out;
}

}  // namespace

void SimScenario::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (!(horizon >= 10.0 * dt))
    throw Error(ErrorKind::InvalidArgument, "horizon must cover at least 10 steps");
  if (!w_step.allFinite()) throw Error(ErrorKind::InvalidArgument, "disturbance is not finite");
}

int Trajectory::channel(const std::string& name) const {
  auto it = std::find(channels.begin(), channels.end(), name);
  return it == channels.end() ? -1 : static_cast<int>(it - channels.begin());
}

Trajectory step_response_linear(const StateSpace& sys, const SimScenario& scen,
                                std::vector<std::string> names) {
  scen.validate();
  if (scen.w_step.size() != sys.inputs())
    throw Error(ErrorKind::InvalidArgument, "disturbance has wrong length");
  if (!is_stable(sys)) throw Error(ErrorKind::InvalidArgument, "step response of an unstable system");
  if (names.empty())
    for (Eigen::Index i = 0; i < sys.outputs(); ++i) names.push_back("y" + std::to_string(i));
  if (static_cast<Eigen::Index>(names.size()) != sys.outputs())
    throw Error(ErrorKind::InvalidArgument, "channel names do not match the outputs");

  const int n = sample_count(scen);
  const double h = scen.dt;
  const Eigen::Index nw = sys.inputs();
  Trajectory tr;
  tr.channels = std::move(names);
  tr.time.resize(n + 1);
  tr.values.resize(n + 1, sys.outputs());

  const Matrix& a = sys.a();
  const Matrix& b = sys.b();
  Vector x = Vector::Zero(sys.states());
  // Input held over each step at its midpoint value, exact for grid-aligned steps.
  auto f = [&](const Vector& xs, const Vector& w) -> Vector { return a * xs + b * w; };
  for (int i = 0; i <= n; ++i) {
    const double t = i * h;
    tr.time[i] = t;
    tr.values.row(i) = (sys.c() * x + sys.d() * input_at(scen, t, nw)).transpose();
    if (i == n) break;
    const Vector w = input_at(scen, t + 0.5 * h, nw);
    const Vector k1 = f(x, w);
    const Vector k2 = f(x + 0.5 * h * k1, w);
    const Vector k3 = f(x + 0.5 * h * k2, w);
    const Vector k4 = f(x + h * k3, w);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return select(std::move(tr), scen.outputs);
}

Trajectory simulate_nonlinear(const CoupledSystem& sys, const OperatingPoint& op,
                              const SimScenario& scen) {
  scen.validate();
  const Eigen::Index nw = sys.disturbances();
  if (scen.w_step.size() != nw) throw Error(ErrorKind::InvalidArgument, "disturbance has wrong length");
  if (op.x0.size() != sys.states() || op.k.size() != static_cast<Eigen::Index>(sys.param_names().size()))
    throw Error(ErrorKind::InvalidArgument, "operating point does not match the system");

  const auto& dyn = sys.dynamic();
  const Vector& k = op.k;
  const double wf = op.omega_frame;
  Trajectory tr;
  for (const auto& d : dyn)
    for (const char* s : {".omega", ".P", ".Q", ".V"}) tr.channels.push_back(d->id() + s);

  const int n = sample_count(scen);
  const double h = scen.dt;
  tr.time.resize(n + 1);
  tr.values.resize(n + 1, static_cast<Eigen::Index>(tr.channels.size()));

  Vector x = op.x0;
  Vector z = sys.z_of(op);
  auto f = [&](const Vector& xs, const Vector& w) -> Vector {
    z = sys.solve_algebraic(xs, w, k, z);
    return sys.derivative(xs, z, k, wf, true);
  };
  for (int i = 0; i <= n; ++i) {
    const double t = i * h;
    tr.time[i] = t;
    z = sys.solve_algebraic(x, input_at(scen, t, nw), k, z);
    Vector v, th;
    sys.phasors(x, z, k, v, th);
    const Injections inj = power_injections(sys.network(), v, th);
    for (std::size_t p = 0; p < dyn.size(); ++p) {
      const auto& d = *dyn[p];
      const Eigen::Vector3d o =
          d.outputs(x.segment(sys.state_offset(static_cast<int>(p)), d.states()), sys.prosumer_params(static_cast<int>(p), k));
      const Eigen::Index c = 4 * static_cast<Eigen::Index>(p);
      tr.values(i, c) = o(2);
      tr.values(i, c + 1) = inj.p(d.bus());
      tr.values(i, c + 2) = inj.q(d.bus());
      tr.values(i, c + 3) = o(1);
    }
    if (i == n) break;
    const Vector w = input_at(scen, t + 0.5 * h, nw);
    const Vector k1 = f(x, w);
    const Vector k2 = f(x + 0.5 * h * k1, w);
    const Vector k3 = f(x + 0.5 * h * k2, w);
    const Vector k4 = f(x + h * k3, w);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite())
      throw Error(ErrorKind::AlgebraicNewtonFailure, "state diverged at t = " + format_double(t));
  }
  return select(std::move(tr), scen.outputs);
}

ResponseMetrics response_metrics(const std::vector<double>& time, const Vector& y,
                                 double step_time, double band) {
  const Eigen::Index n = y.size();
  if (n < 2 || static_cast<Eigen::Index>(time.size()) != n)
    throw Error(ErrorKind::InvalidArgument, "metrics need a sampled signal");
  Eigen::Index start = 0;
  // Last sample before the step; samples at the step instant already carry feedthrough.
  const double eps = 1e-9 * (time[1] - time[0]);
  while (start + 1 < n && time[start + 1] < step_time - eps) ++start;

  ResponseMetrics m;
  m.initial = y(start);
  m.final_value = y(n - 1);
  double step = std::abs(m.final_value - m.initial);
  const double excursion = (y.segment(start, n - start).array() - m.initial).abs().maxCoeff();
  if (excursion <= 1e-10 * (1.0 + std::abs(m.initial))) return m;
  // Signals returning to their initial value: measure against the largest excursion.
  if (step <= 1e-12 * (1.0 + std::abs(m.final_value))) step = excursion;
  const double tol = band * step;

  const Eigen::Index tail = n - std::max<Eigen::Index>(1, (n - start) / 10);
  for (Eigen::Index i = tail; i < n; ++i) {
    if (std::abs(y(i) - m.final_value) > tol + 1e-15)
      throw Error(ErrorKind::NoSteadyState, "signal still moving in the last 10 % of the record");
  }

  const double dir = m.final_value >= m.initial ? 1.0 : -1.0;
  const double step_signed = std::abs(m.final_value - m.initial);
  double peak = -kInf;
  for (Eigen::Index i = start; i < n; ++i) peak = std::max(peak, dir * (y(i) - m.initial));
  m.overshoot = step_signed > 0.0 ? std::max(0.0, (peak - step_signed) / step_signed) : 0.0;

  Eigen::Index last_out = -1;
  for (Eigen::Index i = start; i < n; ++i)
    if (std::abs(y(i) - m.final_value) > tol) last_out = i;
  if (last_out < 0) {
    m.settling_time = 0.0;
  } else {
    // Interpolate the band crossing between the last outside sample and the next.
    const double e0 = std::abs(y(last_out) - m.final_value);
    const double e1 = std::abs(y(last_out + 1) - m.final_value);
    const double frac = e0 > e1 ? (e0 - tol) / (e0 - e1) : 0.0;
    m.settling_time = time[last_out] + frac * (time[last_out + 1] - time[last_out]) - step_time;
  }

  Eigen::Index first_peak = n - 1;
  for (Eigen::Index i = start + 1; i + 1 < n; ++i) {
    const double a = std::abs(y(i - 1) - m.initial), b = std::abs(y(i) - m.initial),
                 c = std::abs(y(i + 1) - m.initial);
    if (b > a && b >= c) {
      first_peak = i;
      break;
    }
  }
  for (Eigen::Index i = first_peak; i + 1 < n; ++i)
    m.osc_energy += std::pow(y(i) - m.final_value, 2) * (time[i + 1] - time[i]);
  return m;
}

std::vector<ResponseMetrics> response_metrics(const Trajectory& traj, double step_time) {
  std::vector<ResponseMetrics> out;
  for (Eigen::Index c = 0; c < traj.values.cols(); ++c)
    out.push_back(response_metrics(traj.time, traj.values.col(c), step_time));
  return out;
}

void write_csv(const Trajectory& traj, std::ostream& os) {
  os << "time";
  for (const auto& c : traj.channels) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < traj.time.size(); ++i) {
    os << format_double(traj.time[i]);
    for (Eigen::Index c = 0; c < traj.values.cols(); ++c)
      os << ',' << format_double(traj.values(static_cast<Eigen::Index>(i), c));
    os << '\n';
  }
}

Trajectory read_csv(std::istream& is) {
  Trajectory tr;
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::Io, "empty trajectory file");
  std::stringstream hs(line);
  std::string cell;
  std::getline(hs, cell, ',');
  if (cell != "time") throw Error(ErrorKind::Io, "trajectory header must start with 'time'");
  while (std::getline(hs, cell, ',')) tr.channels.push_back(cell);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str()) throw Error(ErrorKind::Io, "malformed number '" + cell + "'");
    }
    if (row.size() != tr.channels.size() + 1)
      throw Error(ErrorKind::Io, "trajectory row has " + std::to_string(row.size()) + " cells");
    rows.push_back(std::move(row));
  }
  tr.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(tr.channels.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    tr.time.push_back(rows[i][0]);
    for (std::size_t c = 0; c < tr.channels.size(); ++c)
      tr.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c + 1];
  }
  return tr;
}

}  // namespace hinftune
