#include <algorithm>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "hinftune/lti.hpp"

using namespace hinftune;

namespace {

StateSpace first_order() {
  return StateSpace(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                    Matrix::Zero(1, 1));
}

// Largest singular value via the largest eigenvalue of G^*G.
double sigma_oracle(const CMatrix& g) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(g.adjoint() * g);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

bool contains_pole(const PoleSet& ps, Complex p, double tol) {
  return std::any_of(ps.poles.begin(), ps.poles.end(),
                     [&](Complex q) { return std::abs(q - p) < tol; });
}

}  // namespace

TEST_CASE("state-space construction validates dimensions") {
  CHECK_THROWS_AS(StateSpace(Matrix::Zero(2, 2), Matrix::Zero(1, 1), Matrix::Zero(1, 2),
                             Matrix::Zero(1, 1)),
                  Error);
  Matrix a = Matrix::Zero(1, 1);
  a(0, 0) = std::nan("");
  CHECK_THROWS_AS(StateSpace(a, Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1)),
                  Error);
}

TEST_CASE("eval_freq on first-order lag") {
  const auto sys = first_order();
  const auto r0 = eval_freq(sys, 0.0);
  CHECK(std::abs(r0.g(0, 0) - Complex(1.0, 0.0)) < 1e-14);
  const auto r1 = eval_freq(sys, 1.0);
  CHECK(std::abs(r1.g(0, 0) - Complex(0.5, -0.5)) < 1e-14);
}

TEST_CASE("eval_freq on the 2x2 example system at DC") {
  const auto sys = fixtures::appendix_system();
  const auto r = eval_freq(sys, 0.0);
  CHECK(std::abs(r.g(0, 0) - Complex(2.0 / 3.0, 0.0)) < 1e-12);
  CHECK(std::abs(r.g(1, 1) - Complex(2.0, 0.0)) < 1e-12);
  for (double w : {0.1, 0.87, 3.0}) {
    const CMatrix ref = fixtures::appendix_eval(Complex(0.0, w));
    CHECK((eval_freq(sys, w).g - ref).norm() < 1e-12);
  }
}

TEST_CASE("eval_freq flags a pole on the sample point") {
  Matrix a(2, 2);
  a << 0, 1, -4, 0;  // poles at +-2j
  const StateSpace sys(a, Matrix::Identity(2, 1), Matrix::Identity(1, 2), Matrix::Zero(1, 1));
  try {
    eval_freq(sys, 2.0);
    FAIL("expected SingularAtFrequency");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularAtFrequency);
  }
  const auto res = hinf_norm_grid(sys, FrequencyGrid({1.0, 2.0}));
  CHECK(std::isinf(res.norm));
}

TEST_CASE("sigma_max") {
  CHECK(sigma_max(CMatrix::Constant(1, 1, Complex(1.0, 0.0))) == doctest::Approx(1.0));
  CHECK(sigma_max(CMatrix::Identity(2, 2)) == doctest::Approx(1.0));
  const CMatrix g = fixtures::appendix_eval(Complex(0.0, 0.87));
  CHECK(std::abs(sigma_max(g) - sigma_oracle(g)) < 1e-10);

  std::mt19937 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    CMatrix m(3, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) m(i, j) = Complex(n(rng), n(rng));
    CHECK(std::abs(sigma_max(m) - sigma_oracle(m)) < 1e-10);
  }
}

TEST_CASE("poles") {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << -1, -2;
  auto ps = poles(StateSpace(a, Matrix::Zero(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1)));
  CHECK(contains_pole(ps, {-1, 0}, 1e-12));
  CHECK(contains_pole(ps, {-2, 0}, 1e-12));

  a << 0, 1, -1, -1;
  ps = poles(StateSpace(a, Matrix::Zero(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1)));
  CHECK(contains_pole(ps, {-0.5, 0.8660254037844386}, 1e-10));
  CHECK(contains_pole(ps, {-0.5, -0.8660254037844386}, 1e-10));

  const auto app = poles(fixtures::appendix_system());
  CHECK(app.poles.size() == 9);
  for (const Complex& p : fixtures::appendix_poles()) CHECK(contains_pole(app, p, 1e-6));
  for (const Complex& p : app.poles) {
    CHECK(std::any_of(fixtures::appendix_poles().begin(), fixtures::appendix_poles().end(),
                      [&](Complex q) { return std::abs(q - p) < 1e-6; }));
  }
  // Realization multiplicity: -1 and -3 appear in two entries each.
  auto count = [&](Complex p) {
    return std::count_if(app.poles.begin(), app.poles.end(),
                         [&](Complex q) { return std::abs(q - p) < 1e-6; });
  };
  CHECK(count({-1, 0}) == 2);
  CHECK(count({-3, 0}) == 2);
  CHECK(count({-2, 0}) == 1);
}

TEST_CASE("is_stable with margin") {
  auto scalar = [](double v) {
    return StateSpace(Matrix::Constant(1, 1, v), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                      Matrix::Zero(1, 1));
  };
  CHECK(is_stable(scalar(-1.0), 0.0));
  CHECK_FALSE(is_stable(scalar(0.1), 0.0));
  CHECK_FALSE(is_stable(scalar(-0.01), 0.02));
}

TEST_CASE("detectability by PBH") {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << 0.5, -1.0;
  Matrix c(1, 2);
  c << 0, 1;  // unstable mode invisible
  CHECK_FALSE(is_detectable(StateSpace(a, Matrix::Ones(2, 1), c, Matrix::Zero(1, 1))));
  c << 1, 0;
  CHECK(is_detectable(StateSpace(a, Matrix::Ones(2, 1), c, Matrix::Zero(1, 1))));
}

TEST_CASE("hinf_norm_bisect on simple systems") {
  auto r = hinf_norm_bisect(first_order());
  CHECK(r.stable);
  CHECK(r.norm == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.peak_omega == doctest::Approx(0.0));

  r = hinf_norm_bisect(StateSpace::gain(Matrix::Constant(1, 1, 3.0)));
  CHECK(r.norm == doctest::Approx(3.0));

  const StateSpace unstable(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                            Matrix::Zero(1, 1));
  r = hinf_norm_bisect(unstable);
  CHECK_FALSE(r.stable);
  CHECK(std::isinf(r.norm));
}

TEST_CASE("hinf_norm_bisect agrees with a dense grid on the example system") {
  const auto sys = fixtures::appendix_system();
  const auto bis = hinf_norm_bisect(sys);
  const auto grid = hinf_norm_grid(sys, FrequencyGrid::logspace(1e-3, 1e3, 100000));
  CHECK(std::abs(bis.norm - grid.norm) <= 1e-4 * bis.norm);
  CHECK(grid.norm <= bis.norm * (1.0 + 1e-8));
  // The reported peak achieves the norm.
  CHECK(sigma_max(eval_freq(sys, bis.peak_omega)) == doctest::Approx(bis.norm).epsilon(1e-10));
}

TEST_CASE("hinf_norm_grid") {
  const auto sys = first_order();
  CHECK(hinf_norm_grid(sys, FrequencyGrid({0.0})).norm == doctest::Approx(1.0));
  CHECK(hinf_norm_grid(sys, FrequencyGrid({1.0})).norm ==
        doctest::Approx(0.7071067811865476).epsilon(1e-12));

  std::mt19937 rng(11);
  const auto grid = FrequencyGrid::logspace(1e-3, 1e3, 400);
  for (int k = 0; k < 40; ++k) {
    const auto s = fixtures::random_stable(rng);
    const double tol = 1e-8;
    CHECK(hinf_norm_grid(s, grid).norm <= hinf_norm_bisect(s, tol).norm * (1 + 2 * tol));
  }
}

TEST_CASE("frequency grid stays sorted and deduplicated") {
  FrequencyGrid g({3.0, 1.0, 2.0, 1.0});
  CHECK(g.size() == 3);
  CHECK_FALSE(g.insert(2.0 * (1 + 1e-8)));
  CHECK(g.insert(2.5));
  CHECK(std::is_sorted(g.values().begin(), g.values().end()));
}

TEST_CASE("phi_constraint definiteness") {
  const CMatrix zero = CMatrix::Zero(1, 1);
  const CMatrix phi0 = phi_constraint(zero, 1.0);
  CHECK((phi0 - CMatrix::Identity(2, 2)).norm() == 0.0);
  CHECK(is_positive_definite(phi0));

  const CMatrix one = CMatrix::Ones(1, 1);
  CHECK_FALSE(is_positive_definite(phi_constraint(one, 1.0)));

  const CMatrix g = eval_freq(fixtures::appendix_system(), 0.5).g;
  const double s = sigma_max(g);
  CHECK(is_positive_definite(phi_constraint(g, s + 0.1)));
  CHECK_FALSE(is_positive_definite(phi_constraint(g, s - 0.1)));
}

TEST_CASE("realify_hermitian") {
  Matrix r = realify_hermitian(CMatrix::Ones(1, 1));
  CHECK((r - Matrix::Identity(2, 2)).norm() == 0.0);

  CMatrix m(2, 2);
  m << Complex(1, 0), Complex(0, 1), Complex(0, -1), Complex(1, 0);
  r = realify_hermitian(m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(r);
  Eigen::Vector4d expect(0, 0, 2, 2);
  CHECK((es.eigenvalues() - expect).norm() < 1e-12);

  CMatrix bad = m;
  bad(0, 1) = Complex(0, 2);
  CHECK_THROWS_AS(realify_hermitian(bad), Error);

  // Spectrum doubling on random Hermitian matrices.
  std::mt19937 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    CMatrix h(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) h(i, j) = Complex(n(rng), n(rng));
    h = 0.5 * (h + h.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> ec(h);
    Eigen::SelfAdjointEigenSolver<Matrix> er(realify_hermitian(h));
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(er.eigenvalues()(2 * i) - ec.eigenvalues()(i)) < 1e-10);
      CHECK(std::abs(er.eigenvalues()(2 * i + 1) - ec.eigenvalues()(i)) < 1e-10);
    }
    CHECK(is_positive_definite(h) == is_positive_definite(realify_hermitian(h)));
  }
}

TEST_CASE("Theorem-1 pointwise equivalence on random samples") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.2, 1.8);
  for (int k = 0; k < 60; ++k) {
    const auto sys = fixtures::random_stable(rng);
    const CMatrix g = eval_freq(sys, std::pow(10.0, u(rng) * 2 - 2)).g;
    const double s = sigma_max(g);
    const double gamma = s * u(rng);
    if (std::abs(gamma - s) < 1e-9 * std::max(1.0, s)) continue;
    CHECK(is_positive_definite(phi_constraint(g, gamma)) == (s < gamma));
  }
}

TEST_CASE("sigma_max blows up near a pole as it approaches the axis") {
  double prev = 0.0;
  for (double delta : {1e-1, 1e-2, 1e-3}) {
    Matrix a(2, 2);
    a << -delta, 2.0, -2.0, -delta;
    const StateSpace sys(a, Matrix::Identity(2, 1), Matrix::Identity(1, 2), Matrix::Zero(1, 1));
    const double s = sigma_max(eval_freq(sys, 2.0));
    CHECK(s > prev);
    prev = s;
  }
  CHECK(prev > 100.0);
}

TEST_CASE("poles move continuously with a parameter") {
  // s^2 + k s + 1 with closed-form roots.
  auto roots = [](double k) {
    const Complex disc = std::sqrt(Complex(k * k - 4.0, 0.0));
    return std::pair<Complex, Complex>{(-k + disc) / 2.0, (-k - disc) / 2.0};
  };
  auto numeric = [](double k) {
    Matrix a(2, 2);
    a << 0, 1, -1, -k;
    return poles(StateSpace(a, Matrix::Zero(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1)));
  };
  const double k0 = 0.7;
  double prev_disp = kInf;
  for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const auto p0 = numeric(k0);
    const auto p1 = numeric(k0 + h);
    double disp = 0.0;
    for (const Complex& p : p0.poles) {
      double best = kInf;
      for (const Complex& q : p1.poles) best = std::min(best, std::abs(p - q));
      disp = std::max(disp, best);
    }
    CHECK(disp < prev_disp);
    prev_disp = disp;
    const auto [r1, r2] = roots(k0 + h);
    CHECK(contains_pole(p1, r1, 1e-10));
    CHECK(contains_pole(p1, r2, 1e-10));
  }
  CHECK(prev_disp < 1e-3);
}

TEST_CASE("brl_verify matches the norm threshold") {
  const auto sys = first_order();
  CHECK(brl_verify(sys, 1.1));
  CHECK_FALSE(brl_verify(sys, 0.9));

  std::mt19937 rng(21);
  fixtures::RandomSystemOptions o;
  o.max_states = 6;
  int tested = 0;
  while (tested < 5) {
    const auto s = fixtures::random_stable(rng, o);
    if (s.states() != 6) continue;
    ++tested;
    const double norm = hinf_norm_bisect(s).norm;
    CHECK(brl_verify(s, 1.01 * norm));
    CHECK_FALSE(brl_verify(s, 0.99 * norm));
  }
  Matrix big = -Matrix::Identity(13, 13);
  CHECK_THROWS_AS(brl_verify(StateSpace(big, Matrix::Ones(13, 1), Matrix::Ones(1, 13),
                                        Matrix::Zero(1, 1)),
                             1.0),
                  Error);
}
