#pragma once

// Shared test fixtures: the 2x2 example transfer matrix with known poles and a
// generator for random stable systems. Realizations here are built by hand and
// stay independent of the library's own realization code.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/SVD>

#include "hinftune/lti.hpp"

namespace fixtures {

using hinftune::Complex;
using hinftune::Matrix;
using hinftune::StateSpace;
using hinftune::Vector;

// Controllable canonical form of num(s)/den(s); coefficients highest power
// first, den monic after normalization, deg num < deg den.
inline StateSpace siso_canonical(std::vector<double> num, std::vector<double> den) {
  const double lead = den.front();
  for (auto& v : den) v /= lead;
  for (auto& v : num) v /= lead;
  const int n = static_cast<int>(den.size()) - 1;
  while (static_cast<int>(num.size()) < n) num.insert(num.begin(), 0.0);
  Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, 1), c = Matrix::Zero(1, n);
  for (int i = 0; i + 1 < n; ++i) a(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) a(n - 1, j) = -den[n - j];
  b(n - 1, 0) = 1.0;
  for (int j = 0; j < n; ++j) c(0, j) = num[n - 1 - j];
  return StateSpace(a, b, c, Matrix::Zero(1, 1));
}

inline std::vector<double> polymul(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> r(p.size() + q.size() - 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
  return r;
}

// Entry-wise realization of
//   G'(s) = [ (s+2)/((s+1)(s+3))              (s-3)/(s^2+3s+3)
//             (s^2+4s+10)/((s+3)(s^2+s+1))    (s+4)/((s+1)(s+2)) ]
inline StateSpace appendix_system() {
  struct Entry {
    int row, col;
    std::vector<double> num, den;
  };
  const std::vector<Entry> entries = {
      {0, 0, {1, 2}, polymul({1, 1}, {1, 3})},
      {0, 1, {1, -3}, {1, 3, 3}},
      {1, 0, {1, 4, 10}, polymul({1, 3}, {1, 1, 1})},
      {1, 1, {1, 4}, polymul({1, 1}, {1, 2})},
  };
  int n = 0;
  std::vector<StateSpace> parts;
  for (const auto& e : entries) {
    parts.push_back(siso_canonical(e.num, e.den));
    n += static_cast<int>(parts.back().states());
  }
  Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, 2), c = Matrix::Zero(2, n);
  int off = 0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& p = parts[k];
    const int m = static_cast<int>(p.states());
    a.block(off, off, m, m) = p.a();
    b.block(off, entries[k].col, m, 1) = p.b();
    c.block(entries[k].row, off, 1, m) = p.c();
    off += m;
  }
  return StateSpace(a, b, c, Matrix::Zero(2, 2));
}

// Closed-form evaluation of G'(s) for cross-checks.
inline hinftune::CMatrix appendix_eval(Complex s) {
  hinftune::CMatrix g(2, 2);
  g(0, 0) = (s + 2.0) / ((s + 1.0) * (s + 3.0));
  g(0, 1) = (s - 3.0) / (s * s + 3.0 * s + 3.0);
  g(1, 0) = (s * s + 4.0 * s + 10.0) / ((s + 3.0) * (s * s + s + 1.0));
  g(1, 1) = (s + 4.0) / ((s + 1.0) * (s + 2.0));
  return g;
}

inline const std::vector<Complex>& appendix_poles() {
  static const std::vector<Complex> p = {
      {-1.0, 0.0}, {-2.0, 0.0}, {-3.0, 0.0},
      {-1.5, std::sqrt(3.0) / 2.0}, {-1.5, -std::sqrt(3.0) / 2.0},
      {-0.5, std::sqrt(3.0) / 2.0}, {-0.5, -std::sqrt(3.0) / 2.0}};
  return p;
}

inline double condition_number(const Matrix& m) {
  const Vector sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
  return sv(0) / sv(sv.size() - 1);
}

struct RandomSystemOptions {
  int max_states = 10;
  int max_io = 3;
  double min_mag = 1e-2;
  double max_mag = 1e2;
  double min_damping = 0.02;
  bool with_d = true;
};

// Random stable system with modal magnitudes in [min_mag, max_mag] and
// damping >= min_damping, scrambled by a well-conditioned similarity.
inline StateSpace random_stable(std::mt19937& rng, const RandomSystemOptions& o = {}) {
  std::uniform_int_distribution<int> nd(1, o.max_states), iod(1, o.max_io);
  std::uniform_real_distribution<double> logmag(std::log(o.min_mag), std::log(o.max_mag));
  std::uniform_real_distribution<double> zeta(o.min_damping, 0.95);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int n = nd(rng), nw = iod(rng), ny = iod(rng);
  Matrix lam = Matrix::Zero(n, n);
  int i = 0;
  while (i < n) {
    const double mag = std::exp(logmag(rng));
    if (i + 1 < n && unit(rng) < 0.6) {
      const double z = zeta(rng);
      const double re = -z * mag, im = mag * std::sqrt(1.0 - z * z);
      lam(i, i) = re;
      lam(i, i + 1) = im;
      lam(i + 1, i) = -im;
      lam(i + 1, i + 1) = re;
      i += 2;
    } else {
      lam(i, i) = -mag;
      i += 1;
    }
  }
  Matrix t(n, n);
  do {
    t = Matrix::Identity(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) t(r, c) += 0.3 * gauss(rng);
  } while (condition_number(t) > 100.0);
  const Matrix a = t * lam * t.inverse();
  Matrix b(n, nw), c(ny, n), d = Matrix::Zero(ny, nw);
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < nw; ++k) b(r, k) = gauss(rng);
  for (int r = 0; r < ny; ++r)
    for (int k = 0; k < n; ++k) c(r, k) = gauss(rng);
  if (o.with_d && unit(rng) < 0.5)
    for (int r = 0; r < ny; ++r)
      for (int k = 0; k < nw; ++k) d(r, k) = 0.3 * gauss(rng);
  return StateSpace(a, b, c, d);
}

}  // namespace fixtures
