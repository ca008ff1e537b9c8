#include "hinftune/lti.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "hinftune/parallel.hpp"
#include "hinftune/sdp.hpp"

namespace hinftune {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

// Solves (sI - H) X = R for upper Hessenberg H with partial pivoting.
// Returns false when a pivot is tiny relative to the matrix scale.
bool hessenberg_solve(const Matrix& h, Complex s, CMatrix& rhs, double scale) {
  const Eigen::Index n = h.rows();
  CMatrix m = -h.cast<Complex>();
  m.diagonal().array() += s;
  const double tiny = 1e-10 * scale;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    if (std::abs(m(k + 1, k)) > std::abs(m(k, k))) {
      m.row(k).segment(k, n - k).swap(m.row(k + 1).segment(k, n - k));
      rhs.row(k).swap(rhs.row(k + 1));
    }
    if (std::abs(m(k, k)) <= tiny) return false;
    const Complex l = m(k + 1, k) / m(k, k);
    if (l != Complex(0.0)) {
      m.row(k + 1).segment(k, n - k) -= l * m.row(k).segment(k, n - k);
      rhs.row(k + 1) -= l * rhs.row(k);
    }
  }
  if (n > 0 && std::abs(m(n - 1, n - 1)) <= tiny) return false;
  m.triangularView<Eigen::Upper>().solveInPlace(rhs);
  return true;
}

// Precomputed Hessenberg form for many sigma-max evaluations on jw.
class ResponseSweeper {
 public:
  explicit ResponseSweeper(const StateSpace& sys) : sys_(sys) {
    const Eigen::Index n = sys.states();
    if (n > 0) {
      Eigen::HessenbergDecomposition<Matrix> hd(sys.a());
      h_ = hd.matrixH();
      const Matrix q = hd.matrixQ();
      bq_ = q.transpose() * sys.b();
      cq_ = sys.c() * q;
      scale_ = std::max(1.0, h_.cwiseAbs().maxCoeff());
    }
  }

  double sigma(double omega) const {
    if (sys_.states() == 0) return sigma_max(sys_.d().cast<Complex>());
    CMatrix x = bq_.cast<Complex>();
    if (!hessenberg_solve(h_, Complex(0.0, omega), x, scale_)) {
      try {
        return sigma_max(eval_freq(sys_, omega));
      } catch (const Error&) {
        return kInf;
      }
    }
    const CMatrix g = cq_.cast<Complex>() * x + sys_.d().cast<Complex>();
    if (!g.allFinite()) return kInf;
    return sigma_max(g);
  }

 private:
  const StateSpace& sys_;
  Matrix h_, bq_, cq_;
  double scale_ = 1.0;
};

}  // namespace

StateSpace::StateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
  const bool ok = a_.rows() == a_.cols() && b_.rows() == a_.rows() &&
                  c_.cols() == a_.rows() && d_.rows() == c_.rows() && d_.cols() == b_.cols();
  if (!ok) {
    throw Error(ErrorKind::InvalidArgument, "inconsistent state-space dimensions: A " +
                                                dims(a_) + ", B " + dims(b_) + ", C " +
                                                dims(c_) + ", D " + dims(d_));
  }
  if (!a_.allFinite() || !b_.allFinite() || !c_.allFinite() || !d_.allFinite())
    throw Error(ErrorKind::InvalidArgument, "state-space matrices contain non-finite entries");
}

StateSpace StateSpace::gain(Matrix d) {
  const auto ny = d.rows(), nw = d.cols();
  return StateSpace(Matrix(0, 0), Matrix(0, nw), Matrix(ny, 0), std::move(d));
}

FrequencyGrid::FrequencyGrid(std::vector<double> omegas) {
  std::sort(omegas.begin(), omegas.end());
  for (double w : omegas) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw Error(ErrorKind::InvalidArgument, "grid frequencies must be finite and >= 0");
    insert(w);
  }
}

FrequencyGrid FrequencyGrid::logspace(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi >= lo) || points < 1)
    throw Error(ErrorKind::InvalidArgument, "logspace needs 0 < lo <= hi and points >= 1");
  std::vector<double> w(points);
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < points; ++i)
    w[i] = points == 1 ? lo : std::pow(10.0, a + (b - a) * i / (points - 1));
  return FrequencyGrid(std::move(w));
}

bool FrequencyGrid::insert(double omega) {
  if (!std::isfinite(omega) || omega < 0.0) return false;
  auto it = std::lower_bound(omegas_.begin(), omegas_.end(), omega);
  auto close = [omega](double w) {
    return std::abs(w - omega) <= 1e-6 * std::max(std::abs(w), std::abs(omega));
  };
  if (it != omegas_.end() && close(*it)) return false;
  if (it != omegas_.begin() && close(*std::prev(it))) return false;
  omegas_.insert(it, omega);
  return true;
}

FreqResponse eval_freq(const StateSpace& sys, double omega) {
  FreqResponse r;
  r.omega = omega;
  r.g = eval_at(sys, Complex(0.0, omega));
  return r;
}

CMatrix eval_at(const StateSpace& sys, Complex s) {
  const Eigen::Index n = sys.states();
  if (n == 0) return sys.d().cast<Complex>();
  CMatrix m = -sys.a().cast<Complex>();
  m.diagonal().array() += s;
  Eigen::PartialPivLU<CMatrix> lu(m);
  if (!(lu.rcond() >= 100.0 * kEps)) {
    std::ostringstream os;
    os << "(sI - A) numerically singular at s = " << s.real() << (s.imag() < 0 ? "" : "+")
       << s.imag() << "j";
    throw Error(ErrorKind::SingularAtFrequency, os.str());
  }
  return sys.c().cast<Complex>() * lu.solve(sys.b().cast<Complex>()) +
         sys.d().cast<Complex>();
}

double sigma_max(const CMatrix& g) {
  if (g.size() == 0) return 0.0;
  if (g.rows() == 1 || g.cols() == 1) return g.norm();
  Eigen::JacobiSVD<CMatrix> svd(g);
  return svd.singularValues()(0);
}

PoleSet poles(const StateSpace& sys) {
  PoleSet ps;
  if (sys.states() == 0) return ps;
  Eigen::EigenSolver<Matrix> es(sys.a(), false);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::EigenFailure, "eigenvalue iteration did not converge");
  const auto& ev = es.eigenvalues();
  ps.poles.assign(ev.data(), ev.data() + ev.size());
  return ps;
}

double spectral_abscissa(const Matrix& a) {
  if (a.rows() == 0) return -kInf;
  Eigen::EigenSolver<Matrix> es(a, false);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::EigenFailure, "eigenvalue iteration did not converge");
  return es.eigenvalues().real().maxCoeff();
}

bool is_stable(const StateSpace& sys, double margin) {
  return spectral_abscissa(sys.a()) < -margin;
}

bool is_detectable(const StateSpace& sys, double rank_tol) {
  const Eigen::Index n = sys.states();
  for (const Complex& lam : poles(sys).poles) {
    if (lam.real() < 0.0) continue;
    CMatrix pbh(n + sys.outputs(), n);
    pbh.topRows(n) = sys.a().cast<Complex>();
    pbh.topRows(n).diagonal().array() -= lam;
    pbh.bottomRows(sys.outputs()) = sys.c().cast<Complex>();
    Eigen::JacobiSVD<CMatrix> svd(pbh);
    const auto& sv = svd.singularValues();
    if (sv.size() < n || sv(n - 1) <= rank_tol * std::max(1.0, sv(0))) return false;
  }
  return true;
}

namespace {

// Nonnegative frequencies of imaginary-axis eigenvalues of the Hamiltonian
// whose imaginary-axis eigenvalues are the jw with sigma_max(G(jw)) = gamma.
std::vector<double> hamiltonian_crossings(const StateSpace& sys, double gamma) {
  const Eigen::Index n = sys.states(), nw = sys.inputs(), ny = sys.outputs();
  const Matrix& a = sys.a();
  const Matrix& b = sys.b();
  const Matrix& c = sys.c();
  const Matrix& d = sys.d();
  const double g2 = gamma * gamma;
  const Matrix r = g2 * Matrix::Identity(nw, nw) - d.transpose() * d;
  const Matrix s = g2 * Matrix::Identity(ny, ny) - d * d.transpose();
  const Eigen::LDLT<Matrix> rinv(r);
  const Eigen::LDLT<Matrix> sinv(s);

  const Matrix a_h = a + b * rinv.solve(d.transpose() * c);
  Matrix h(2 * n, 2 * n);
  h.topLeftCorner(n, n) = a_h;
  h.topRightCorner(n, n) = gamma * b * rinv.solve(b.transpose());
  h.bottomLeftCorner(n, n) = -gamma * c.transpose() * sinv.solve(c);
  h.bottomRightCorner(n, n) = -a_h.transpose();

  Eigen::EigenSolver<Matrix> es(h, false);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::EigenFailure, "Hamiltonian eigenvalues did not converge");
  const double scale = std::max(1.0, h.cwiseAbs().rowwise().sum().maxCoeff());
  std::vector<double> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const Complex lam = es.eigenvalues()(i);
    if (lam.imag() < 0.0) continue;
    if (std::abs(lam.real()) <= 1e-7 * std::max(scale, std::abs(lam))) out.push_back(lam.imag());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

HinfResult hinf_norm_bisect(const StateSpace& sys, double tol) {
  HinfResult res;
  res.method = HinfResult::Method::Bisection;
  if (sys.states() == 0) {
    res.norm = sigma_max(sys.d().cast<Complex>());
    res.peak_omega = 0.0;
    res.stable = true;
    return res;
  }
  if (!is_stable(sys, 0.0)) {
    res.norm = kInf;
    res.stable = false;
    return res;
  }
  res.stable = true;
  if (!is_detectable(sys)) spdlog::warn("hinf_norm_bisect: realization is not detectable");

  const ResponseSweeper sweep(sys);
  double lo = sigma_max(sys.d().cast<Complex>());
  double peak = kInf;
  auto consider = [&](double w) {
    const double v = sweep.sigma(w);
    if (v > lo) {
      lo = v;
      peak = w;
    }
  };

  // Coarse bracket: 64 log-spaced points around the pole magnitudes, plus DC
  // and the pole imaginary parts.
  const PoleSet ps = poles(sys);
  double wmin = kInf, wmax = 0.0;
  for (const Complex& p : ps.poles) {
    const double m = std::abs(p);
    if (m > 0.0) {
      wmin = std::min(wmin, m);
      wmax = std::max(wmax, m);
    }
    consider(std::abs(p.imag()));
  }
  if (!std::isfinite(wmin)) wmin = wmax = 1.0;
  consider(0.0);
  for (double w : FrequencyGrid::logspace(wmin / 10.0, wmax * 10.0, 64).values()) consider(w);

  double hi = 10.0 * lo;
  if (lo == 0.0) {
    res.norm = 0.0;
    res.peak_omega = 0.0;
    return res;
  }
  // hi bounds the norm once no crossing is confirmed by sigma at that frequency.
  for (int guard = 0;; ++guard) {
    bool attained = false;
    for (double w : hamiltonian_crossings(sys, hi)) {
      consider(w);
      if (sweep.sigma(w) >= (1.0 - 1e-3) * hi) attained = true;
    }
    if (!attained) break;
    if (guard > 60) throw Error(ErrorKind::NonConvergence, "cannot bracket the H-infinity norm");
    hi = std::max(4.0 * hi, 10.0 * lo);
  }

  for (int it = 0; it < 200 && hi - lo > tol * lo; ++it) {
    const double gamma = 0.5 * (lo + hi);
    std::vector<double> w = hamiltonian_crossings(sys, gamma);
    if (!w.empty()) {
      w.insert(w.begin(), 0.0);
      for (std::size_t i = 0; i < w.size(); ++i) {
        consider(w[i]);
        if (i + 1 < w.size()) consider(0.5 * (w[i] + w[i + 1]));
      }
    }
    // A sample at or above gamma raises lo past the midpoint; otherwise the
    // level is not attained anywhere.
    if (lo < gamma) hi = gamma;
  }
  res.norm = lo;
  res.peak_omega = std::isfinite(peak) ? peak : kInf;
  return res;
}

std::vector<double> sigma_sweep(const StateSpace& sys, const FrequencyGrid& grid) {
  const ResponseSweeper sweep(sys);
  const auto& w = grid.values();
  std::vector<double> out(w.size());
  parallel_for(w.size(), [&](std::size_t i) { out[i] = sweep.sigma(w[i]); });
  return out;
}

HinfResult hinf_norm_grid(const StateSpace& sys, const FrequencyGrid& grid) {
  HinfResult res;
  res.method = HinfResult::Method::Grid;
  res.norm = 0.0;
  res.stable = sys.states() == 0 || is_stable(sys, 0.0);
  const std::vector<double> sv = sigma_sweep(sys, grid);
  for (std::size_t i = 0; i < sv.size(); ++i) {
    if (sv[i] > res.norm || (i == 0 && sv[i] >= res.norm)) {
      res.norm = sv[i];
      res.peak_omega = grid.values()[i];
    }
  }
  return res;
}

CMatrix phi_constraint(const CMatrix& g, double gamma) {
  const Eigen::Index ny = g.rows(), nw = g.cols();
  CMatrix m(ny + nw, ny + nw);
  m.topLeftCorner(ny, ny) = gamma * CMatrix::Identity(ny, ny);
  m.topRightCorner(ny, nw) = g;
  m.bottomLeftCorner(nw, ny) = g.adjoint();
  m.bottomRightCorner(nw, nw) = gamma * CMatrix::Identity(nw, nw);
  return m;
}

Matrix realify_hermitian(const CMatrix& m, double tol) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::NotHermitian, "matrix is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
    throw Error(ErrorKind::NotHermitian, "matrix is not Hermitian within tolerance");
  const Eigen::Index n = m.rows();
  const Matrix x = 0.5 * (m.real() + m.real().transpose());
  const Matrix y = 0.5 * (m.imag() - m.imag().transpose());
  Matrix out(2 * n, 2 * n);
  out << x, -y, y, x;
  return out;
}

bool is_positive_definite(const CMatrix& m) {
  Eigen::LLT<CMatrix> llt(m);
  return llt.info() == Eigen::Success;
}

bool is_positive_definite(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

bool brl_verify(const StateSpace& sys, double gamma, int size_cap) {
  const int n = static_cast<int>(sys.states());
  if (n > size_cap)
    throw Error(ErrorKind::SizeCap, "brl_verify is limited to " + std::to_string(size_cap) +
                                        " states, got " + std::to_string(n));
  if (!(gamma > 0.0)) return false;
  const int nw = static_cast<int>(sys.inputs()), ny = static_cast<int>(sys.outputs());

  // Normalize to a unit bound: ||G|| < gamma  <=>  ||G / gamma|| < 1.
  const double root = std::sqrt(gamma);
  const Matrix& a = sys.a();
  const Matrix b = sys.b() / root;
  const Matrix c = sys.c() / root;
  const Matrix d = sys.d() / gamma;

  // Variables: upper-triangular entries of P, then a margin t.
  // Maximize t subject to -LMI(P) - tI >= 0 and P - tI >= 0.
  sdp::Problem prob;
  const int m = n + nw + ny;
  const int lmi = prob.add_block(m);
  const int pos = n > 0 ? prob.add_block(n) : -1;

  Matrix c0 = Matrix::Zero(m, m);
  c0.block(n, n, nw, nw) = Matrix::Identity(nw, nw);
  c0.block(n + nw, n + nw, ny, ny) = Matrix::Identity(ny, ny);
  c0.block(0, n + nw, n, ny) = -c.transpose();
  c0.block(n + nw, 0, ny, n) = -c;
  c0.block(n, n + nw, nw, ny) = -d.transpose();
  c0.block(n + nw, n, ny, nw) = -d;
  prob.c[lmi] = c0;

  int var = 0;
  for (int k = 0; k < n; ++k) {
    for (int l = k; l < n; ++l, ++var) {
      Matrix e = Matrix::Zero(n, n);
      e(k, l) = 1.0;
      e(l, k) = 1.0;
      Matrix term = Matrix::Zero(m, m);
      term.topLeftCorner(n, n) = a.transpose() * e + e * a;
      term.block(0, n, n, nw) = e * b;
      term.block(n, 0, nw, n) = b.transpose() * e;
      prob.add_term(var, lmi, term);
      prob.add_term(var, pos, -e);
    }
  }
  const int t = var;
  prob.add_term(t, lmi, Matrix::Identity(m, m));
  if (pos >= 0) prob.add_term(t, pos, Matrix::Identity(n, n));
  prob.b = Vector::Zero(t + 1);
  prob.b(t) = 1.0;

  sdp::Options opts;
  opts.gap_tol = 1e-10;
  opts.feas_tol = 1e-10;
  const sdp::Result r = sdp::solve(prob, opts);
  return r.y(t) > 1e-9;
}

}  // namespace hinftune
