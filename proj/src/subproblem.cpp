#include "hinftune/subproblem.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "hinftune/parallel.hpp"
#include "hinftune/sdp.hpp"

namespace hinftune {

namespace {

// realify([[0, G], [G^*, 0]])
Matrix realified_dilation(const CMatrix& g) {
  const Eigen::Index ny = g.rows(), nw = g.cols(), n = ny + nw;
  Matrix x = Matrix::Zero(n, n), y = Matrix::Zero(n, n);
  x.topRightCorner(ny, nw) = g.real();
  x.bottomLeftCorner(nw, ny) = g.real().transpose();
  y.topRightCorner(ny, nw) = g.imag();
  y.bottomLeftCorner(nw, ny) = -g.imag().transpose();
  Matrix out(2 * n, 2 * n);
  out << x, -y, y, x;
  return out;
}

void check_model(const AffineResponseModel& m, Eigen::Index n_params) {
  if (m.anchor.size() != n_params)
    throw Error(ErrorKind::InvalidArgument, "affine models disagree on the parameter count");
  if (m.base.size() != m.omegas.size() || m.sens.size() != m.omegas.size())
    throw Error(ErrorKind::InvalidArgument, "affine model has inconsistent sample counts");
  for (std::size_t f = 0; f < m.omegas.size(); ++f) {
    if (static_cast<Eigen::Index>(m.sens[f].size()) != n_params)
      throw Error(ErrorKind::InvalidArgument, "affine model lacks a sensitivity");
    for (const auto& s : m.sens[f]) {
      if (s.rows() != m.base[f].rows() || s.cols() != m.base[f].cols())
        throw Error(ErrorKind::InvalidArgument, "sensitivity dimension mismatch");
      if (!s.allFinite()) throw Error(ErrorKind::InvalidArgument, "sensitivity is not finite");
    }
    if (m.base[f].rows() != m.base[0].rows() || m.base[f].cols() != m.base[0].cols())
      throw Error(ErrorKind::InvalidArgument, "response dimension changes across frequencies");
  }
}

}  // namespace

std::vector<CMatrix> AffineResponseModel::evaluate(const Vector& k) const {
  const Vector dk = k - anchor;
  std::vector<CMatrix> out(base.size());
  for (std::size_t f = 0; f < base.size(); ++f) {
    out[f] = base[f];
    for (Eigen::Index i = 0; i < dk.size(); ++i)
      if (dk(i) != 0.0) out[f] += dk(i) * sens[f][i];
  }
  return out;
}

double AffineResponseModel::peak(const Vector& k) const {
  double best = 0.0;
  for (const auto& g : evaluate(k)) best = std::max(best, sigma_max(g));
  return best;
}

AffineResponseModel linearize_response(const ParamSystem& sys, const Vector& k_anchor,
                                       const FrequencyGrid& grid) {
  if (grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty frequency grid");
  if (!sys.in_box(k_anchor, 1e-12))
    throw Error(ErrorKind::InvalidArgument, "anchor lies outside the parameter box");

  const StateSpace g0 = sys(k_anchor);
  const Eigen::Index np = sys.size(), n = g0.states();

  std::vector<Matrix> da(np), db(np), dc(np), dd(np);
  for (Eigen::Index i = 0; i < np; ++i) {
    const double h = std::max(1e-6 * std::abs(k_anchor(i)), 1e-8);
    Vector kp = k_anchor, km = k_anchor;
    kp(i) += h;
    km(i) -= h;
    const StateSpace sp = sys(kp), sm = sys(km);
    if (sp.states() != n || sm.states() != n || sp.inputs() != g0.inputs() ||
        sp.outputs() != g0.outputs() || sm.inputs() != g0.inputs() ||
        sm.outputs() != g0.outputs())
      throw Error(ErrorKind::InvalidArgument,
                  "realization dimension changes with parameter " + sys.names()[i]);
    da[i] = (sp.a() - sm.a()) / (2.0 * h);
    db[i] = (sp.b() - sm.b()) / (2.0 * h);
    dc[i] = (sp.c() - sm.c()) / (2.0 * h);
    dd[i] = (sp.d() - sm.d()) / (2.0 * h);
  }

  AffineResponseModel model;
  model.anchor = k_anchor;
  model.omegas = grid.values();
  const std::size_t nf = model.omegas.size();
  model.base.resize(nf);
  model.sens.assign(nf, std::vector<CMatrix>(np));

  const CMatrix ac = g0.a().cast<Complex>();
  const CMatrix bc = g0.b().cast<Complex>();
  const CMatrix cc = g0.c().cast<Complex>();

  parallel_for(nf, [&](std::size_t f) {
    const double w = model.omegas[f];
    if (n == 0) {
      model.base[f] = g0.d().cast<Complex>();
      for (Eigen::Index i = 0; i < np; ++i) model.sens[f][i] = dd[i].cast<Complex>();
      return;
    }
    const CMatrix m = Complex(0.0, w) * CMatrix::Identity(n, n) - ac;
    Eigen::PartialPivLU<CMatrix> lu(m);
    const double rcond = lu.rcond();
    if (!(rcond >= 100.0 * std::numeric_limits<double>::epsilon()))
      throw Error(ErrorKind::SingularAtFrequency,
                  "jwI - A is singular at w = " + std::to_string(w));
    const CMatrix x = lu.solve(bc);  // (jwI - A)^-1 B
    model.base[f] = cc * x + g0.d().cast<Complex>();
    for (Eigen::Index i = 0; i < np; ++i) {
      model.sens[f][i] = cc * lu.solve(da[i].cast<Complex>() * x + db[i].cast<Complex>()) +
                         dc[i].cast<Complex>() * x + dd[i].cast<Complex>();
    }
  });
  return model;
}

const char* to_string(SubproblemSolution::Status status) {
  switch (status) {
    case SubproblemSolution::Status::Optimal: return "optimal";
    case SubproblemSolution::Status::MaxIter: return "max_iter";
    case SubproblemSolution::Status::Infeasible: return "infeasible";
  }
  return "unknown";
}

SubproblemSolution solve_subproblem(const SubproblemSpec& spec) {
  if (spec.models.empty()) throw Error(ErrorKind::InvalidArgument, "subproblem without models");
  const Vector& anchor = spec.models.front().anchor;
  const Eigen::Index np = anchor.size();
  if (spec.k_min.size() != np || spec.k_max.size() != np || spec.delta_k.size() != np)
    throw Error(ErrorKind::InvalidArgument, "subproblem bounds have the wrong length");
  for (const auto& m : spec.models) {
    check_model(m, np);
    if (m.anchor != anchor) throw Error(ErrorKind::InvalidArgument, "models have different anchors");
  }
  for (Eigen::Index i = 0; i < np; ++i) {
    if (!(spec.delta_k(i) > 0.0))
      throw Error(ErrorKind::InvalidArgument, "trust region must be positive");
    if (!(anchor(i) >= spec.k_min(i) && anchor(i) <= spec.k_max(i)))
      throw Error(ErrorKind::InvalidArgument, "anchor lies outside the parameter box");
  }

  // Box intersected with the trust region, mapped onto u in [-1, 1].
  const Vector lo = spec.k_min.cwiseMax(anchor - spec.delta_k);
  const Vector hi = spec.k_max.cwiseMin(anchor + spec.delta_k);
  const Vector center = 0.5 * (lo + hi);
  const Vector radius = 0.5 * (hi - lo);
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < np; ++i)
    if (radius(i) > 1e-14 * std::max(1.0, std::abs(center(i)))) free.push_back(i);

  Vector k_fixed = anchor;
  for (Eigen::Index i = 0; i < np; ++i) k_fixed(i) = center(i);

  double anchor_peak = 0.0;
  for (const auto& m : spec.models) anchor_peak = std::max(anchor_peak, m.peak(anchor));

  SubproblemSolution sol;
  sol.k_next = anchor;
  sol.gamma = anchor_peak;
  if (free.empty()) {
    sol.status = SubproblemSolution::Status::Optimal;
    return sol;
  }

  double center_peak = 0.0;
  for (const auto& m : spec.models) center_peak = std::max(center_peak, m.peak(k_fixed));
  const double scale = anchor_peak > 1e-300 ? anchor_peak : 1.0;

  const int nu = static_cast<int>(free.size());
  const int var_gamma = nu;
  sdp::Problem prob;
  prob.b = Vector::Zero(nu + 1);
  prob.b(var_gamma) = -1.0;

  // Exact duplicates (repeated scenarios) are redundant and skipped.
  std::vector<std::pair<const AffineResponseModel*, std::size_t>> added;
  auto duplicate = [&](const AffineResponseModel& m, std::size_t f) {
    for (const auto& [pm, pf] : added) {
      if (pm->base[pf] != m.base[f]) continue;
      bool same = true;
      for (Eigen::Index i = 0; i < np && same; ++i) same = pm->sens[pf][i] == m.sens[f][i];
      if (same) return true;
    }
    return false;
  };
  for (const auto& m : spec.models) {
    const Vector shift = k_fixed - anchor;
    for (std::size_t f = 0; f < m.frequencies(); ++f) {
      if (duplicate(m, f)) continue;
      added.emplace_back(&m, f);
      CMatrix gc = m.base[f];
      for (Eigen::Index i = 0; i < np; ++i)
        if (shift(i) != 0.0) gc += shift(i) * m.sens[f][i];
      const Matrix c = realified_dilation(gc / scale);
      const int blk = prob.add_block(static_cast<int>(c.rows()));
      prob.c[blk] = c;
      for (int j = 0; j < nu; ++j)
        prob.add_term(j, blk, -realified_dilation(m.sens[f][free[j]] * (radius(free[j]) / scale)));
      prob.add_term(var_gamma, blk, -Matrix::Identity(c.rows(), c.cols()));
    }
  }
  const Matrix one = Matrix::Ones(1, 1);
  for (int j = 0; j < nu; ++j) {
    const int up = prob.add_block(1);
    prob.c[up] = one;
    prob.add_term(j, up, one);
    const int down = prob.add_block(1);
    prob.c[down] = one;
    prob.add_term(j, down, -one);
  }

  Vector y0 = Vector::Zero(nu + 1);
  y0(var_gamma) = 1.5 * center_peak / scale + 1.0;

  sdp::Options opts;
  opts.gap_tol = spec.tol;
  opts.max_iter = spec.max_iter;
  const sdp::Result r = sdp::solve(prob, opts, &y0);
  sol.iterations = r.iterations;

  Vector cand = k_fixed;
  bool usable = r.y.size() == nu + 1 && r.y.allFinite();
  if (usable) {
    for (int j = 0; j < nu; ++j) {
      const Eigen::Index i = free[j];
      cand(i) = std::clamp(center(i) + radius(i) * std::clamp(r.y(j), -1.0, 1.0), lo(i), hi(i));
    }
  }
  double cand_peak = 0.0;
  for (const auto& m : spec.models) cand_peak = std::max(cand_peak, m.peak(cand));

  if (r.status == sdp::Status::Failed) {
    spdlog::warn("subproblem interior point failed after {} iterations", r.iterations);
    sol.status = SubproblemSolution::Status::MaxIter;
  } else {
    sol.status = r.status == sdp::Status::Optimal ? SubproblemSolution::Status::Optimal
                                                  : SubproblemSolution::Status::MaxIter;
  }
  if (cand_peak <= anchor_peak) {
    sol.k_next = cand;
    sol.gamma = cand_peak;
  }
  return sol;
}

}  // namespace hinftune
