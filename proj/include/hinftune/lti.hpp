#pragma once

#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "hinftune/error.hpp"

namespace hinftune {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Continuous-time realization x' = Ax + Bw, y = Cx + Dw.
// Dimensions are validated on construction and entries must be finite.
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(Matrix a, Matrix b, Matrix c, Matrix d);

  static StateSpace gain(Matrix d);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }
  const Matrix& d() const { return d_; }

  Eigen::Index states() const { return a_.rows(); }
  Eigen::Index inputs() const { return d_.cols(); }
  Eigen::Index outputs() const { return d_.rows(); }

 private:
  Matrix a_, b_, c_, d_;
};

// Ordered, deduplicated set of nonnegative sampling frequencies in rad/s.
class FrequencyGrid {
 public:
  FrequencyGrid() = default;
  explicit FrequencyGrid(std::vector<double> omegas);

  static FrequencyGrid logspace(double lo, double hi, int points);

  // Inserts omega unless an existing sample lies within relative 1e-6.
  // Returns true when the grid grew.
  bool insert(double omega);

  const std::vector<double>& values() const { return omegas_; }
  std::size_t size() const { return omegas_.size(); }
  bool empty() const { return omegas_.empty(); }

 private:
  std::vector<double> omegas_;
};

struct FreqResponse {
  double omega = 0.0;
  CMatrix g;
};

struct PoleSet {
  std::vector<Complex> poles;  // repeated entries carry multiplicity
};

struct HinfResult {
  enum class Method { Bisection, Grid };

  double norm = kInf;
  double peak_omega = 0.0;
  bool stable = false;
  Method method = Method::Bisection;
};

// C(jwI - A)^-1 B + D by LU solve. Throws SingularAtFrequency when the
// reciprocal condition estimate of (jwI - A) drops below 100 eps.
FreqResponse eval_freq(const StateSpace& sys, double omega);

// Transfer matrix at an arbitrary complex point s.
CMatrix eval_at(const StateSpace& sys, Complex s);

double sigma_max(const CMatrix& g);
inline double sigma_max(const FreqResponse& r) { return sigma_max(r.g); }

PoleSet poles(const StateSpace& sys);

double spectral_abscissa(const Matrix& a);

// True iff every eigenvalue of A has real part < -margin.
bool is_stable(const StateSpace& sys, double margin = 0.0);

// PBH test: rank [A - lambda I; C] = n at every eigenvalue with Re >= 0.
bool is_detectable(const StateSpace& sys, double rank_tol = 1e-8);

// Hamiltonian-eigenvalue bisection. Unstable systems come back with
// stable = false and norm = +inf.
HinfResult hinf_norm_bisect(const StateSpace& sys, double tol = 1e-8);

// Max of sigma_max over the grid. A pole on a grid point contributes +inf.
HinfResult hinf_norm_grid(const StateSpace& sys, const FrequencyGrid& grid);

// Sigma-max sweep over the grid, in grid order.
std::vector<double> sigma_sweep(const StateSpace& sys, const FrequencyGrid& grid);

// [[gamma I, G], [G^*, gamma I]].
CMatrix phi_constraint(const CMatrix& g, double gamma);

// For M = X + jY returns [[X, -Y], [Y, X]].
Matrix realify_hermitian(const CMatrix& m, double tol = 1e-9);

// Strict definiteness by Cholesky.
bool is_positive_definite(const CMatrix& m);
bool is_positive_definite(const Matrix& m);

// Bounded-real-lemma feasibility check for ||G||_inf < gamma with a stable A,
// solved with the SDP kernel. Intended for small systems only.
bool brl_verify(const StateSpace& sys, double gamma, int size_cap = 12);

}  // namespace hinftune
