#include <random>

#include "doctest.h"
#include "grid_fixtures.hpp"
#include "hinftune/tuner.hpp"
#include "random_diagrams.hpp"

using namespace hinftune;

namespace {

ParamSystem first_order_family() {
  return ParamSystem({"K"}, Vector::Constant(1, 1.0), Vector::Constant(1, 10.0), [](const Vector& k) {
    return StateSpace(Matrix::Constant(1, 1, -k(0)), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                      Matrix::Zero(1, 1));
  });
}

// (s + K) / (s^2 + 0.1 s + 1)
ParamSystem resonant_family() {
  return ParamSystem({"K"}, Vector::Constant(1, -2.0), Vector::Constant(1, 2.0), [](const Vector& k) {
    Matrix a(2, 2);
    a << 0.0, 1.0, -1.0, -0.1;
    Matrix c(1, 2);
    c << k(0), 1.0;
    Matrix b = Matrix::Zero(2, 1);
    b(1, 0) = 1.0;
    return StateSpace(a, b, c, Matrix::Zero(1, 1));
  });
}

TuneConfig default_config(Eigen::Index n, double dk, FrequencyGrid grid) {
  TuneConfig cfg;
  cfg.delta_k0 = Vector::Constant(n, dk);
  cfg.grid0 = std::move(grid);
  cfg.k_max = 40;
  return cfg;
}

void check_shrinks(const TuneReport& r, double alpha) {
  for (std::size_t i = 0; i + 1 < r.iterations.size(); ++i) {
    const auto& it = r.iterations[i];
    const Vector expect = it.accepted ? it.delta_k : Vector(alpha * it.delta_k);
    CHECK((r.iterations[i + 1].delta_k - expect).cwiseAbs().maxCoeff() == 0.0);
  }
}

}  // namespace

TEST_CASE("monotone scalar family converges to the upper bound") {
  const auto cfg = default_config(1, 2.0, FrequencyGrid::logspace(0.01, 100.0, 20));
  const TuneReport r = tune(first_order_family(), Vector::Constant(1, 1.0), cfg);
  CHECK(r.norm0 == doctest::Approx(1.0));
  CHECK(r.k_opt(0) == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(r.norm_opt == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(safeguard_check(r));
  check_shrinks(r, cfg.alpha);
}

TEST_CASE("resonant family reaches the brute-force optimum") {
  const ParamSystem ps = resonant_family();
  auto cfg = default_config(1, 0.5, FrequencyGrid::logspace(0.05, 20.0, 30));
  const TuneReport r = tune(ps, Vector::Constant(1, 1.5), cfg);
  CHECK(safeguard_check(r));
  CHECK(r.norm_opt <= r.norm0);
  double best = kInf;
  for (int i = 0; i <= 4000; ++i) {
    const double k = -2.0 + 4.0 * i / 4000.0;
    best = std::min(best, hinf_norm_bisect(ps(Vector::Constant(1, k))).norm);
  }
  CHECK(r.norm_opt <= best * (1.0 + 1e-3));
  for (const auto& it : r.iterations)
    if (it.accepted) CHECK(is_stable(ps(it.k)));
}

TEST_CASE("unstable start raises InitialUnstable with eigenvalues") {
  const ParamSystem ps({"K"}, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0),
                       [](const Vector& k) {
                         return StateSpace(Matrix::Constant(1, 1, k(0)), Matrix::Ones(1, 1),
                                           Matrix::Ones(1, 1), Matrix::Zero(1, 1));
                       });
  const auto cfg = default_config(1, 0.1, FrequencyGrid({1.0}));
  try {
    tune(ps, Vector::Constant(1, 0.5), cfg);
    FAIL("expected InitialUnstable");
  } catch (const UnstableStartError& e) {
    CHECK(e.kind() == ErrorKind::InitialUnstable);
    REQUIRE(e.eigenvalues().size() == 1);
    CHECK(e.eigenvalues()[0].real() == doctest::Approx(0.5));
  }
  CHECK_THROWS_AS(tune(ps, Vector::Constant(1, 0.0), cfg), UnstableStartError);
}

TEST_CASE("refine_grid adds the unstable pair frequency") {
  const ParamSystem ps({"s"}, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0),
                       [](const Vector& k) {
                         Matrix a(2, 2);
                         a << k(0), 5.0, -5.0, k(0);
                         return StateSpace(a, Matrix::Ones(2, 1), Matrix::Ones(1, 2),
                                           Matrix::Zero(1, 1));
                       });
  FrequencyGrid g({1.0, 2.0});
  CHECK(refine_grid(g, ps, Vector::Constant(1, 0.01), 2.0) == 1);
  CHECK(g.values() == std::vector<double>{1.0, 2.0, 5.0});

  FrequencyGrid h({1.0, 2.0});
  CHECK(refine_grid(h, ps, Vector::Constant(1, -0.5), 3.2) == 1);
  CHECK(h.values() == std::vector<double>{1.0, 2.0, 3.2});
}

TEST_CASE("grid growth stays within two samples per rejection") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 4; ++trial) {
    const auto loop = fixtures::random_tunable_loop(rng, 4);
    auto cfg = default_config(loop.system.size(), 0.5, FrequencyGrid::logspace(0.1, 10.0, 8));
    cfg.k_max = 15;
    const TuneReport r = tune(loop.system, loop.k0, cfg);
    int rejections = 0, additions = 0;
    for (const auto& it : r.iterations) {
      if (!it.accepted) ++rejections;
      additions += it.grid_additions;
      CHECK(it.grid_additions <= 2);
    }
    REQUIRE(r.final_grid_sizes.size() == 1);
    CHECK(r.final_grid_sizes[0] == 8u + static_cast<std::size_t>(additions));
    CHECK(r.final_grid_sizes[0] <= 8u + static_cast<std::size_t>(cfg.k_max + 2 * rejections));
  }
}

TEST_CASE("safeguard_check rejects an unstable accepted iterate") {
  TuneReport r;
  r.norm0 = 2.0;
  TuneIteration a;
  a.accepted = true;
  a.stable = true;
  a.norm = 1.5;
  r.iterations.push_back(a);
  r.norm_opt = 1.5;
  CHECK(safeguard_check(r));
  TuneIteration b = a;
  b.stable = false;
  b.norm = 1.0;
  r.iterations.push_back(b);
  r.norm_opt = 1.0;
  CHECK_FALSE(safeguard_check(r));
  r.iterations.back().stable = true;
  r.iterations.back().norm = 1.5;
  r.norm_opt = 1.5;
  CHECK_FALSE(safeguard_check(r));
}

TEST_CASE("single scenario and duplicated scenarios match tune") {
  std::mt19937 rng(21);
  const auto loop = fixtures::random_tunable_loop(rng, 3);
  auto cfg = default_config(loop.system.size(), 0.3, FrequencyGrid::logspace(0.1, 10.0, 12));
  cfg.k_max = 12;
  const TuneReport single = tune(loop.system, loop.k0, cfg);

  ScenarioSet one;
  one.systems = {loop.system};
  one.grids = {cfg.grid0};
  const TuneReport multi = tune_multi(one, loop.k0, cfg);
  CHECK(multi.k_opt == single.k_opt);
  CHECK(multi.norm_opt == single.norm_opt);
  CHECK(multi.iterations.size() == single.iterations.size());

  ScenarioSet two = one;
  two.systems.push_back(loop.system);
  two.grids.push_back(cfg.grid0);
  const TuneReport dup = tune_multi(two, loop.k0, cfg);
  CHECK(dup.k_opt == single.k_opt);
  CHECK(dup.norm_opt == single.norm_opt);
}

TEST_CASE("tuning is deterministic") {
  std::mt19937 rng(4);
  const auto loop = fixtures::random_tunable_loop(rng, 5);
  auto cfg = default_config(loop.system.size(), 0.3, FrequencyGrid::logspace(0.1, 10.0, 12));
  cfg.k_max = 10;
  const TuneReport a = tune(loop.system, loop.k0, cfg);
  const TuneReport b = tune(loop.system, loop.k0, cfg);
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    CHECK(a.iterations[i].k == b.iterations[i].k);
    CHECK(a.iterations[i].norm == b.iterations[i].norm);
  }
}

TEST_CASE("random tunable loops keep the safeguards") {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 8; ++trial) {
    const auto loop = fixtures::random_tunable_loop(rng, 2 + trial % 7);
    auto cfg = default_config(loop.system.size(), 0.5, FrequencyGrid::logspace(0.05, 20.0, 15));
    cfg.k_max = 15;
    TuneReport r;
    try {
      r = tune(loop.system, loop.k0, cfg);
    } catch (const TuneError& e) {
      r = e.report();
    }
    INFO("trial " << trial);
    CHECK(safeguard_check(r));
    CHECK(r.norm_opt <= r.norm0);
    CHECK(loop.system.in_box(r.k_opt, 1e-12));
    check_shrinks(r, cfg.alpha);
    for (const auto& it : r.iterations)
      if (it.accepted) CHECK(is_stable(loop.system(it.k), 1e-8));
  }
}

TEST_CASE("two-inverter demo norm drops by more than half") {
  const CoupledSystem sys = fixtures::two_inverter_demo();
  const ParamSystem ps = fixtures::demo_param_system(sys);
  TuneConfig cfg;
  cfg.delta_k0 = 0.25 * (ps.upper() - ps.lower());
  cfg.grid0 = FrequencyGrid::logspace(0.1, 1000.0, 60);
  cfg.k_max = 30;
  const TuneReport r = tune(ps, sys.nominal(), cfg);
  MESSAGE("demo norm " << r.norm0 << " -> " << r.norm_opt << " in " << r.iterations.size()
                       << " iterations (" << r.termination << ")");
  CHECK(safeguard_check(r));
  CHECK(r.norm_opt < 0.5 * r.norm0);
}

TEST_CASE("demo variants with the load at different buses") {
  fixtures::DemoOptions a, b;
  b.load_bus = 3;
  const CoupledSystem sa = fixtures::two_inverter_demo(a), sb = fixtures::two_inverter_demo(b);
  ScenarioSet scen;
  scen.systems = {fixtures::demo_param_system(sa), fixtures::demo_param_system(sb)};
  TuneConfig cfg;
  cfg.delta_k0 = 0.25 * (scen.systems[0].upper() - scen.systems[0].lower());
  cfg.grid0 = FrequencyGrid::logspace(0.1, 1000.0, 40);
  cfg.k_max = 15;
  const TuneReport r = tune_multi(scen, sa.nominal(), cfg);
  CHECK(safeguard_check(r));
  CHECK(r.norm_opt <= r.norm0);
  for (const auto& s : scen.systems) CHECK(is_stable(s(r.k_opt)));
}
