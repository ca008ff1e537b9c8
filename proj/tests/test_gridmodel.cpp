#include <algorithm>
#include <complex>
#include <random>

#include "doctest.h"
#include "grid_fixtures.hpp"
#include "hinftune/error.hpp"
#include "hinftune/gridmodel.hpp"

using namespace hinftune;

namespace {

Network two_bus(double b_line, double g_line = 0.0) {
  Matrix g(2, 2), b(2, 2);
  g << g_line, -g_line, -g_line, g_line;
  b << -b_line, b_line, b_line, -b_line;
  return Network(g, b, {BusKind::Static, BusKind::Static});
}

// S_i = V_i conj(sum_j Y_ij V_j) with complex phasors.
Vector complex_power_residual(const Network& net, const Vector& v, const Vector& th, const Vector& p,
                              const Vector& q) {
  const int n = net.buses();
  Eigen::VectorXcd vp(n);
  for (int i = 0; i < n; ++i) vp(i) = std::polar(v(i), th(i));
  const Eigen::MatrixXcd y = net.g().cast<Complex>() + Complex(0, 1) * net.b().cast<Complex>();
  const Eigen::VectorXcd cur = y * vp;
  Vector r(2 * n);
  for (int i = 0; i < n; ++i) {
    const Complex s = vp(i) * std::conj(cur(i));
    r(i) = s.real() - p(i);
    r(n + i) = s.imag() - q(i);
  }
  return r;
}

Network random_network(std::mt19937& rng, int n, bool lossless) {
  std::uniform_real_distribution<double> x(0.05, 0.3), rx(0.05, 0.4);
  std::vector<Branch> br;
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    const double xi = x(rng);
    br.push_back({parent(rng), i, lossless ? 0.0 : rx(rng) * xi, xi, 0.0});
  }
  const double xi = x(rng);
  if (n > 2) br.push_back({0, n - 1, lossless ? 0.0 : 0.1 * xi, xi, lossless ? 0.0 : 0.02});
  return Network::from_branches(n, br, std::vector<BusKind>(n, BusKind::Static));
}

std::vector<Complex> sorted_eigs(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a);
  std::vector<Complex> e(es.eigenvalues().data(), es.eigenvalues().data() + a.rows());
  std::sort(e.begin(), e.end(), [](Complex p, Complex q) {
    return std::make_pair(p.real(), p.imag()) < std::make_pair(q.real(), q.imag());
  });
  return e;
}

// Eliminated Jacobians of the full nonlinear model by central differences.
std::pair<Matrix, Matrix> fd_linearization(const CoupledSystem& sys, const OperatingPoint& op,
                                           const Vector& k) {
  const Eigen::Index n = sys.states(), nw = sys.disturbances();
  const Vector z0 = sys.z_of(op), w0 = Vector::Zero(nw);
  Matrix a(n, n), b(n, nw);
  auto f = [&](const Vector& x, const Vector& w) {
    const Vector z = sys.solve_algebraic(x, w, k, z0, 1e-13);
    return sys.derivative(x, z, k, op.omega_frame, false);
  };
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector xp = op.x0, xm = op.x0;
    xp(j) += h;
    xm(j) -= h;
    a.col(j) = (f(xp, w0) - f(xm, w0)) / (2 * h);
  }
  for (Eigen::Index j = 0; j < nw; ++j) {
    Vector wp = w0, wm = w0;
    wp(j) += h;
    wm(j) -= h;
    b.col(j) = (f(op.x0, wp) - f(op.x0, wm)) / (2 * h);
  }
  return {a, b};
}

}  // namespace

TEST_CASE("two-bus lossless line injections") {
  const Network net = two_bus(10.0);
  Vector v(2), th(2), zero = Vector::Zero(2);
  v << 1.0, 1.0;
  th << 0.0, 0.0;
  Vector r = power_flow_residual(net, v, th, zero, zero);
  CHECK(std::abs(r(0)) < 1e-15);
  CHECK(std::abs(r(1)) < 1e-15);
  th << 0.1, 0.0;
  r = power_flow_residual(net, v, th, zero, zero);
  CHECK(r(0) == doctest::Approx(0.99833416646828).epsilon(1e-12));
  CHECK(r(0) == doctest::Approx(10.0 * std::sin(0.1)).epsilon(1e-14));
}

TEST_CASE("branch admittance convention round-trips") {
  const Network net = Network::from_branches(2, {{0, 1, 0.0, 0.1, 0.0}}, {BusKind::Static, BusKind::Static});
  CHECK(net.b()(0, 1) == doctest::Approx(10.0));
  CHECK(net.b()(0, 0) == doctest::Approx(-10.0));
  CHECK(net.g().cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(Network(Matrix::Identity(2, 2), Matrix::Zero(2, 2), {BusKind::Static, BusKind::Static}), Error);
}

TEST_CASE("injections agree with complex power and Jacobian with differences") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> vd(0.9, 1.1), td(-0.3, 0.3), pd(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = random_network(rng, 5, false);
    Vector v(5), th(5), p(5), q(5);
    for (int i = 0; i < 5; ++i) {
      v(i) = vd(rng);
      th(i) = td(rng);
      p(i) = pd(rng);
      q(i) = pd(rng);
    }
    CHECK((power_flow_residual(net, v, th, p, q) - complex_power_residual(net, v, th, p, q))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    const Matrix j = power_flow_jacobian(net, v, th);
    Matrix jfd(10, 10);
    const double h = 1e-6;
    for (int c = 0; c < 10; ++c) {
      Vector vp = v, vm = v, tp = th, tm = th;
      if (c < 5) {
        tp(c) += h;
        tm(c) -= h;
      } else {
        vp(c - 5) += h;
        vm(c - 5) -= h;
      }
      jfd.col(c) = (complex_power_residual(net, vp, tp, p, q) - complex_power_residual(net, vm, tm, p, q)) / (2 * h);
    }
    CHECK((j - jfd).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, j.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("power flow: zero injections give a flat profile") {
  std::mt19937 rng(1);
  const Network net = random_network(rng, 4, true);
  const OperatingPoint op = solve_power_flow(net, Vector::Zero(4), Vector::Zero(4), 0);
  CHECK((op.v - Vector::Ones(4)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(op.theta.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("power flow: two-bus load angle") {
  const Network net = two_bus(10.0);
  const double d = std::asin(0.05);
  Vector p(2), q(2);
  p << 0.0, -0.5;
  q << 0.0, 10.0 * (1.0 - std::cos(d));
  const OperatingPoint op = solve_power_flow(net, p, q, 0);
  CHECK(op.theta(0) - op.theta(1) == doctest::Approx(d).epsilon(1e-10));
  CHECK(d == doctest::Approx(0.05002).epsilon(1e-4));
  CHECK(op.v(1) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("power flow: random cases converge, lossless cases conserve power") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> pd(-0.4, 0.4);
  for (int trial = 0; trial < 20; ++trial) {
    const bool lossless = trial % 2 == 0;
    const Network net = random_network(rng, 4, lossless);
    Vector p(4), q(4);
    for (int i = 0; i < 4; ++i) {
      p(i) = pd(rng);
      q(i) = 0.3 * pd(rng);
    }
    const OperatingPoint op = solve_power_flow(net, p, q, 0);
    Vector spec_p = p, spec_q = q;
    spec_p(0) = op.p(0);
    spec_q(0) = op.q(0);
    CHECK(power_flow_residual(net, op.v, op.theta, spec_p, spec_q).cwiseAbs().maxCoeff() < 1e-10);
    if (lossless) CHECK(std::abs(op.p.sum()) < 1e-10);
  }
}

TEST_CASE("power flow: multistart least squares finds the same branch") {
  const Network net = Network::from_branches(
      3, {{0, 1, 0.02, 0.1, 0.0}, {1, 2, 0.03, 0.15, 0.0}, {0, 2, 0.01, 0.12, 0.0}},
      std::vector<BusKind>(3, BusKind::Static));
  Vector p(3), q(3);
  p << 0.0, -0.6, -0.4;
  q << 0.0, -0.2, -0.1;
  const OperatingPoint op = solve_power_flow(net, p, q, 0);

  // Levenberg-Marquardt on the four PQ-bus unknowns with difference Jacobians.
  auto res = [&](const Vector& u) {
    Vector v(3), th(3);
    v << 1.0, u(2), u(3);
    th << 0.0, u(0), u(1);
    const Vector r = complex_power_residual(net, v, th, p, q);
    Vector f(4);
    f << r(1), r(2), r(4), r(5);
    return f;
  };
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> td(-1.0, 1.0), vd(0.3, 1.3);
  int found = 0;
  double best_v = -1.0;
  Vector best;
  for (int start = 0; start < 100; ++start) {
    Vector u(4);
    u << td(rng), td(rng), vd(rng), vd(rng);
    double mu = 1e-3;
    for (int it = 0; it < 200; ++it) {
      const Vector f = res(u);
      Matrix j(4, 4);
      for (int c = 0; c < 4; ++c) {
        Vector up = u;
        up(c) += 1e-7;
        j.col(c) = (res(up) - f) / 1e-7;
      }
      const Vector step = (j.transpose() * j + mu * Matrix::Identity(4, 4)).ldlt().solve(j.transpose() * f);
      const Vector un = u - step;
      if (res(un).norm() < f.norm()) {
        u = un;
        mu = std::max(1e-12, mu * 0.3);
      } else {
        mu *= 10.0;
      }
    }
    if (res(u).cwiseAbs().maxCoeff() < 1e-9) {
      ++found;
      u(0) = std::remainder(u(0), 2 * M_PI);
      u(1) = std::remainder(u(1), 2 * M_PI);
      if (u(2) + u(3) > best_v) {
        best_v = u(2) + u(3);
        best = u;
      }
    }
  }
  REQUIRE(found > 0);
  CHECK(std::abs(best(0) - op.theta(1)) < 1e-7);
  CHECK(std::abs(best(1) - op.theta(2)) < 1e-7);
  CHECK(std::abs(best(2) - op.v(1)) < 1e-7);
  CHECK(std::abs(best(3) - op.v(2)) < 1e-7);
}

TEST_CASE("power flow: infeasible loading does not converge") {
  const Network net = two_bus(10.0);
  Vector p(2), q(2);
  p << 0.0, -20.0;
  q << 0.0, 0.0;
  try {
    solve_power_flow(net, p, q, 0);
    FAIL("expected NonConvergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonConvergence);
  }
}

TEST_CASE("coupled system construction") {
  const Network net = Network::from_branches(2, {{0, 1, 0.01, 0.1, 0.0}}, {BusKind::Dynamic, BusKind::Static});
  DroopInverter inv;
  inv.rating = 1.0;
  auto d = std::make_shared<DroopProsumer>(inv, 0, 1.0);
  const CoupledSystem one = build_coupled_system(net, {d}, {{"load", 1, -0.3, 0.0, true, false}});
  CHECK(one.states() == 3);
  CHECK(one.param_names() == std::vector<std::string>{"inv.K_P", "inv.K_Q", "inv.T_f", "inv.T_v"});

  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  const Network two_dyn = Network::from_branches(2, {{0, 1, 0.01, 0.1, 0.0}}, {BusKind::Dynamic, BusKind::Dynamic});
  CHECK(kind_of([&] { build_coupled_system(two_dyn, {d}, {}); }) == ErrorKind::UnmodeledBus);
  auto on_static = std::make_shared<DroopProsumer>(inv, 1, 1.0);
  CHECK(kind_of([&] { build_coupled_system(net, {on_static}, {{"load", 1, 0, 0, true, false}}); }) ==
        ErrorKind::UnmodeledBus);
  CHECK(kind_of([&] { build_coupled_system(net, {d}, {{"load", 0, 0, 0, true, false}}); }) ==
        ErrorKind::UnmodeledBus);

  const CoupledSystem demo = fixtures::two_inverter_demo();
  CHECK(demo.states() == 6);
  CHECK(demo.static_buses().size() == 2);
  CHECK(demo.param_names().front() == "inv1.K_P");
  CHECK(demo.param_names().back() == "inv6.T_v");
}

TEST_CASE("operating point satisfies the network and prosumer equations") {
  const CoupledSystem sys = fixtures::two_inverter_demo();
  const OperatingPoint op = sys.solve_operating_point(sys.nominal());
  const Vector w0 = Vector::Zero(sys.disturbances());
  CHECK(sys.algebraic_residual(op.x0, sys.z_of(op), w0, sys.nominal()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sys.derivative(op.x0, sys.z_of(op), sys.nominal(), op.omega_frame, false).cwiseAbs().maxCoeff() < 1e-10);
  // The full power flow at the operating point balances the static infeeds.
  const Injections in = sys.static_infeed(w0);
  for (int b : sys.static_buses()) {
    CHECK(std::abs(op.p(b) - in.p(b)) < 1e-10);
    CHECK(std::abs(op.q(b) - in.q(b)) < 1e-10);
  }
  // Equal droops share the load equally; frequency drops by K_P times the share.
  CHECK(op.p(0) == doctest::Approx(op.p(1)).epsilon(1e-8));
  CHECK(op.omega_frame == doctest::Approx(1.0 - 0.02 * op.p(0)).epsilon(1e-12));
}

TEST_CASE("linearization matches differences of the nonlinear model") {
  const CoupledSystem sys = fixtures::two_inverter_demo();
  const OperatingPoint op = sys.solve_operating_point(sys.nominal());
  const StateSpace lin = linearize_at(sys, op, sys.nominal());
  const auto [a_fd, b_fd] = fd_linearization(sys, op, sys.nominal());
  CHECK((lin.a() - a_fd).cwiseAbs().maxCoeff() <= 1e-6 * lin.a().cwiseAbs().maxCoeff());
  CHECK((lin.b() - b_fd).cwiseAbs().maxCoeff() <= 1e-6 * lin.b().cwiseAbs().maxCoeff());

  int zeros = 0;
  for (const auto& p : poles(lin).poles) zeros += std::abs(p) < 1e-8 ? 1 : 0;
  CHECK(zeros == 1);

  OperatingPoint shifted = op;
  shifted.theta.array() += 0.3;
  for (std::size_t i = 0; i < sys.dynamic().size(); ++i)
    shifted.x0(sys.state_offset(static_cast<int>(i)) + sys.dynamic()[i]->theta_state()) += 0.3;
  const StateSpace lin_s = linearize_at(sys, shifted, sys.nominal());
  CHECK((lin_s.a() - lin.a()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("linearization of random droop networks") {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const CoupledSystem sys = fixtures::random_droop_network(rng, 6, 3);
    const OperatingPoint op = sys.solve_operating_point(sys.nominal());
    const StateSpace lin = linearize_at(sys, op, sys.nominal());
    const auto [a_fd, b_fd] = fd_linearization(sys, op, sys.nominal());
    CHECK((lin.a() - a_fd).cwiseAbs().maxCoeff() <= 1e-6 * lin.a().cwiseAbs().maxCoeff());
    CHECK((lin.b() - b_fd).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, lin.b().cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("zero-mode removal preserves the remaining spectrum") {
  const CoupledSystem sys = fixtures::two_inverter_demo();
  const OperatingPoint op = sys.solve_operating_point(sys.nominal());
  const ParamSystem full = linearize(sys, op);
  const ZeroModeReduction red = remove_zero_mode(full, sys.nominal());
  const StateSpace a = full(sys.nominal()), r = red.reduced(sys.nominal());
  CHECK(r.states() == a.states() - 1);
  auto ea = sorted_eigs(a.a());
  const auto er = sorted_eigs(r.a());
  const auto zero = std::min_element(ea.begin(), ea.end(), [](Complex p, Complex q) { return std::abs(p) < std::abs(q); });
  ea.erase(zero);
  REQUIRE(ea.size() == er.size());
  for (std::size_t i = 0; i < er.size(); ++i) CHECK(std::abs(ea[i] - er[i]) < 1e-8 * std::max(1.0, std::abs(ea[i])));

  CHECK(std::isfinite(hinf_norm_bisect(r).norm));
  CHECK_FALSE(hinf_norm_bisect(a).stable);

  try {
    remove_zero_mode(red.reduced, sys.nominal());
    FAIL("expected NoZeroMode");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoZeroMode);
  }

  // Reduction commutes with an angle-reference shift of the operating point.
  OperatingPoint shifted = op;
  shifted.theta.array() -= 0.7;
  for (std::size_t i = 0; i < sys.dynamic().size(); ++i)
    shifted.x0(sys.state_offset(static_cast<int>(i)) + sys.dynamic()[i]->theta_state()) -= 0.7;
  LinearizeOptions fixed;
  fixed.resolve_operating_point = false;
  const ParamSystem full_s = linearize(sys, shifted, fixed);
  const StateSpace rs = remove_zero_mode(full_s, sys.nominal()).reduced(sys.nominal());
  CHECK((rs.a() - r.a()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("multiple zero modes are rejected") {
  Matrix a = Matrix::Zero(3, 3);
  a(2, 2) = -1.0;
  const ParamSystem ps({}, Vector(0), Vector(0), [a](const Vector&) {
    return StateSpace(a, Matrix::Ones(3, 1), Matrix::Ones(1, 3), Matrix::Zero(1, 1));
  });
  try {
    remove_zero_mode(ps, Vector(0));
    FAIL("expected MultipleZeroModes");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MultipleZeroModes);
  }
}

TEST_CASE("steady-state power sharing follows inverse droop ratio") {
  fixtures::DemoOptions o;
  const CoupledSystem base = fixtures::two_inverter_demo(o);
  Vector k = base.nominal();
  k(base.param_names().size() == 8 ? 4 : 0) = 0.04;  // inv6.K_P
  REQUIRE(base.param_names()[4] == "inv6.K_P");
  const OperatingPoint op = base.solve_operating_point(k);
  LinearizeOptions lo;
  lo.power_outputs = true;
  const ParamSystem lin = linearize(base, op, lo);
  const StateSpace r = remove_zero_mode(lin, k).reduced(k);
  const Matrix dc = r.d() - r.c() * r.a().fullPivLu().solve(r.b());
  // Outputs: omega_1, omega_6, P_1, P_6
  CHECK(dc(2, 0) / dc(3, 0) == doctest::Approx(0.04 / 0.02).epsilon(1e-6));
  CHECK(dc(0, 0) == doctest::Approx(dc(1, 0)).epsilon(1e-9));
}

TEST_CASE("zero-mode contract on random droop networks") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    const CoupledSystem sys = fixtures::random_droop_network(rng, 5 + trial, 2 + trial % 3);
    const OperatingPoint op = sys.solve_operating_point(sys.nominal());
    const ParamSystem lin = linearize(sys, op);
    const StateSpace a = lin(sys.nominal());
    int zeros = 0;
    for (const auto& p : poles(a).poles) zeros += std::abs(p) < 1e-8 ? 1 : 0;
    CHECK(zeros == 1);
    const StateSpace r = remove_zero_mode(lin, sys.nominal()).reduced(sys.nominal());
    CHECK(r.states() == a.states() - 1);
  }
}
