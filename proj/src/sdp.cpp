#include "hinftune/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hinftune::sdp {

int Problem::add_block(int dim) {
  block_dims.push_back(dim);
  c.push_back(Matrix::Zero(dim, dim));
  return static_cast<int>(block_dims.size()) - 1;
}

void Problem::add_term(int variable, int block, Matrix mat) {
  if (static_cast<int>(a.size()) <= variable) a.resize(variable + 1);
  a[variable].push_back({block, std::move(mat)});
}

namespace {

using Blocks = std::vector<Matrix>;

double inner(const Blocks& x, const Blocks& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k].cwiseProduct(y[k]).sum();
  return s;
}

double frob(const Blocks& x) { return std::sqrt(inner(x, x)); }

struct Workspace {
  const Problem& prob;
  // Terms regrouped by block: (variable, matrix pointer).
  std::vector<std::vector<std::pair<int, const Matrix*>>> by_block;

  explicit Workspace(const Problem& p) : prob(p), by_block(p.block_dims.size()) {
    for (int i = 0; i < p.variables(); ++i) {
      if (i >= static_cast<int>(p.a.size())) break;
      for (const auto& t : p.a[i]) by_block[t.block].push_back({i, &t.mat});
    }
  }

  Vector apply(const Blocks& w) const {
    Vector out = Vector::Zero(prob.variables());
    for (std::size_t k = 0; k < by_block.size(); ++k)
      for (const auto& [i, m] : by_block[k]) out(i) += m->cwiseProduct(w[k]).sum();
    return out;
  }

  Blocks adjoint(const Vector& v) const {
    Blocks out;
    out.reserve(by_block.size());
    for (std::size_t k = 0; k < by_block.size(); ++k) {
      Matrix acc = Matrix::Zero(prob.block_dims[k], prob.block_dims[k]);
      for (const auto& [i, m] : by_block[k]) acc.noalias() += v(i) * (*m);
      out.push_back(std::move(acc));
    }
    return out;
  }
};

Blocks sub(const Blocks& x, const Blocks& y) {
  Blocks r(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) r[k] = x[k] - y[k];
  return r;
}

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Largest alpha in (0, 1] keeping x + alpha dx positive definite, scaled by frac.
double step_length(const Blocks& x, const Blocks& dx, double frac) {
  double alpha_max = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k].rows() == 1) {
      if (dx[k](0, 0) < 0.0) alpha_max = std::min(alpha_max, -x[k](0, 0) / dx[k](0, 0));
      continue;
    }
    Eigen::LLT<Matrix> llt(x[k]);
    if (llt.info() != Eigen::Success) return 0.0;
    Matrix w = llt.matrixL().solve(dx[k]);
    w = llt.matrixL().solve(w.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(w), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    if (lmin < 0.0) alpha_max = std::min(alpha_max, -1.0 / lmin);
  }
  return std::min(1.0, frac * alpha_max);
}

bool invert_blocks(const Blocks& s, Blocks& z) {
  z.resize(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    Eigen::LLT<Matrix> llt(s[k]);
    if (llt.info() != Eigen::Success) return false;
    z[k] = sym(llt.solve(Matrix::Identity(s[k].rows(), s[k].cols())));
  }
  return true;
}

bool all_pd(const Blocks& s) {
  for (const auto& m : s) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return false;
  }
  return true;
}

}  // namespace

Result solve(const Problem& prob, const Options& opts, const Vector* y0) {
  const Workspace ws(prob);
  const int m = prob.variables();
  const std::size_t nb = prob.block_dims.size();
  double n_total = 0.0;
  for (int d : prob.block_dims) n_total += d;

  double norm_c = 0.0;
  for (const auto& c : prob.c) norm_c += c.squaredNorm();
  norm_c = std::sqrt(norm_c);
  const double norm_b = prob.b.norm();

  double max_a = 0.0, xi = std::max(10.0, std::sqrt(n_total));
  for (int i = 0; i < m && i < static_cast<int>(prob.a.size()); ++i) {
    double ai = 0.0;
    for (const auto& t : prob.a[i]) ai += t.mat.squaredNorm();
    ai = std::sqrt(ai);
    max_a = std::max(max_a, ai);
    xi = std::max(xi, (1.0 + std::abs(prob.b(i))) / (1.0 + ai));
  }
  const double eta = std::max({10.0, std::sqrt(n_total), max_a, norm_c});

  Blocks x(nb), s(nb), z;
  for (std::size_t k = 0; k < nb; ++k)
    x[k] = xi * Matrix::Identity(prob.block_dims[k], prob.block_dims[k]);

  Vector y = Vector::Zero(m);
  bool have_start = false;
  if (y0 != nullptr && y0->size() == m) {
    y = *y0;
    s = sub(prob.c, ws.adjoint(y));
    for (auto& blk : s) blk = sym(blk);
    have_start = all_pd(s);
  }
  if (!have_start) {
    y.setZero();
    for (std::size_t k = 0; k < nb; ++k)
      s[k] = eta * Matrix::Identity(prob.block_dims[k], prob.block_dims[k]);
  }

  Result res;
  res.status = Status::MaxIter;

  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    res.iterations = iter;
    const double mu = inner(x, s) / n_total;
    const Vector rp = prob.b - ws.apply(x);
    Blocks rd = sub(sub(prob.c, ws.adjoint(y)), s);
    const double pobj = inner(prob.c, x);
    const double dobj = prob.b.dot(y);
    const double gap = std::max(std::abs(pobj - dobj), n_total * mu);
    const double rel_gap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double pinf = rp.norm() / (1.0 + norm_b);
    const double dinf = frob(rd) / (1.0 + norm_c);

    res.primal_objective = pobj;
    res.dual_objective = dobj;
    res.rel_gap = rel_gap;
    if (rel_gap < opts.gap_tol && pinf < opts.feas_tol && dinf < opts.feas_tol) {
      res.status = Status::Optimal;
      break;
    }
    if (iter == opts.max_iter) break;

    if (!invert_blocks(s, z)) {
      res.status = Status::Failed;
      break;
    }

    // Schur complement M_ij = <A_i, X A_j Z>.
    Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < nb; ++k) {
      const auto& terms = ws.by_block[k];
      for (std::size_t p = 0; p < terms.size(); ++p) {
        const Matrix xaz = x[k] * (*terms[p].second) * z[k];
        for (std::size_t q = p; q < terms.size(); ++q) {
          const double v = terms[q].second->cwiseProduct(xaz).sum();
          schur(terms[p].first, terms[q].first) += v;
          if (q != p) schur(terms[q].first, terms[p].first) += v;
        }
      }
    }
    schur = 0.5 * (schur + schur.transpose());
    Eigen::LLT<Eigen::MatrixXd> chol(schur);
    if (chol.info() != Eigen::Success) {
      const double reg = 1e-12 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
      chol.compute(schur + reg * Eigen::MatrixXd::Identity(m, m));
      if (chol.info() != Eigen::Success) {
        res.status = Status::Failed;
        break;
      }
    }

    Blocks xrdz(nb);
    for (std::size_t k = 0; k < nb; ++k) xrdz[k] = x[k] * rd[k] * z[k];
    const Vector a_xrdz = ws.apply(xrdz);

    // Direction for complementarity target R with RZ given.
    auto direction = [&](const Blocks& rz, Vector& dy, Blocks& dx, Blocks& ds) {
      const Vector rhs = rp - ws.apply(rz) + a_xrdz;
      dy = chol.solve(rhs);
      ds = sub(rd, ws.adjoint(dy));
      dx.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) dx[k] = sym(rz[k] - x[k] * ds[k] * z[k]);
    };

    Vector dy;
    Blocks dx, ds;
    Blocks rz(nb);
    for (std::size_t k = 0; k < nb; ++k) rz[k] = -x[k];
    direction(rz, dy, dx, ds);

    const double ap_aff = step_length(x, dx, 1.0);
    const double ad_aff = step_length(s, ds, 1.0);
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb; ++k)
      mu_aff += (x[k] + ap_aff * dx[k]).cwiseProduct(s[k] + ad_aff * ds[k]).sum();
    mu_aff /= n_total;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    for (std::size_t k = 0; k < nb; ++k)
      rz[k] = sigma * mu * z[k] - x[k] - dx[k] * ds[k] * z[k];
    Vector dy_c;
    Blocks dx_c, ds_c;
    direction(rz, dy_c, dx_c, ds_c);

    const double ap = step_length(x, dx_c, opts.step_fraction);
    const double ad = step_length(s, ds_c, opts.step_fraction);
    if (ap <= 0.0 && ad <= 0.0) {
      res.status = Status::Failed;
      break;
    }
    for (std::size_t k = 0; k < nb; ++k) {
      x[k] = sym(x[k] + ap * dx_c[k]);
      s[k] = sym(s[k] + ad * ds_c[k]);
    }
    y += ad * dy_c;
  }

  res.y = y;
  res.x = std::move(x);
  res.s = std::move(s);
  return res;
}

}  // namespace hinftune::sdp
