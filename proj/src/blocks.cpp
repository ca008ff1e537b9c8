#include "hinftune/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "hinftune/error.hpp"

namespace hinftune {

namespace {

struct KindInfo {
  BlockKind kind;
  const char* name;
  std::vector<std::string> params;
};

const std::vector<KindInfo>& kind_table() {
  static const std::vector<KindInfo> table = {
      {BlockKind::Gain, "gain", {"K"}},
      {BlockKind::InverseGain, "inverse_gain", {"R"}},
      {BlockKind::Integrator, "integrator", {"K"}},
      {BlockKind::FirstOrderLag, "first_order_lag", {"K", "T"}},
      {BlockKind::LeadLag, "lead_lag", {"T_den", "T_num"}},
      {BlockKind::Washout, "washout", {"K", "T_w"}},
      {BlockKind::DerivativeLag, "derivative_lag", {"K", "T"}},
      {BlockKind::Notch, "notch", {"A_1", "A_2"}},
      {BlockKind::Limiter, "limiter", {"max", "min"}},
  };
  return table;
}

const KindInfo& info(BlockKind kind) {
  for (const auto& k : kind_table())
    if (k.kind == kind) return k;
  throw Error(ErrorKind::InvalidArgument, "unknown block kind");
}

bool is_time_constant(BlockKind kind, const std::string& p) {
  switch (kind) {
    case BlockKind::FirstOrderLag:
    case BlockKind::DerivativeLag:
      return p == "T";
    case BlockKind::LeadLag:
      return p == "T_num" || p == "T_den";
    case BlockKind::Washout:
      return p == "T_w";
    default:
      return false;
  }
}

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); }

// Realization with a fixed structure: `minimal` collapses a lead-lag with
// equal time constants to a static gain.
StateSpace realize(const Block& b, bool minimal) {
  auto mat = [](std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
      Eigen::Index j = 0;
      for (double v : r) m(i, j++) = v;
      ++i;
    }
    return m;
  };
  auto first_order = [&](double a, double bb, double c, double d) {
    return StateSpace(mat({{a}}), mat({{bb}}), mat({{c}}), mat({{d}}));
  };
  switch (b.kind()) {
    case BlockKind::Gain:
      return StateSpace::gain(mat({{b.param("K")}}));
    case BlockKind::InverseGain:
      return StateSpace::gain(mat({{1.0 / b.param("R")}}));
    case BlockKind::Limiter:
      return StateSpace::gain(mat({{1.0}}));
    case BlockKind::Integrator:
      return first_order(0.0, b.param("K"), 1.0, 0.0);
    case BlockKind::FirstOrderLag: {
      const double t = b.param("T");
      return first_order(-1.0 / t, b.param("K") / t, 1.0, 0.0);
    }
    case BlockKind::LeadLag: {
      const double tn = b.param("T_num"), td = b.param("T_den");
      if (minimal && tn == td) return StateSpace::gain(mat({{1.0}}));
      return first_order(-1.0 / td, 1.0 / td, 1.0 - tn / td, tn / td);
    }
    case BlockKind::Washout: {
      const double k = b.param("K"), t = b.param("T_w");
      return first_order(-1.0 / t, 1.0, -k / t, k);
    }
    case BlockKind::DerivativeLag: {
      const double k = b.param("K"), t = b.param("T");
      return first_order(-1.0 / t, 1.0, -k / (t * t), k / t);
    }
    case BlockKind::Notch: {
      const double a1 = b.param("A_1"), a2 = b.param("A_2");
      return StateSpace(mat({{0.0, 1.0}, {-1.0 / a2, -a1 / a2}}), mat({{0.0}, {1.0}}),
                        mat({{1.0 / a2, 0.0}}), mat({{0.0}}));
    }
  }
  invalid("unknown block kind");
}

struct Ports {
  std::map<std::string, int> input, block, output;
};

Ports index_ports(const BlockDiagram& d) {
  Ports p;
  std::set<std::string> seen;
  auto claim = [&](const std::string& name) {
    if (name.empty()) invalid("empty port or block name");
    if (name.find('.') != std::string::npos) invalid("name '" + name + "' contains '.'");
    if (!seen.insert(name).second) invalid("duplicate port or block name '" + name + "'");
  };
  for (std::size_t i = 0; i < d.inputs.size(); ++i) {
    claim(d.inputs[i]);
    p.input[d.inputs[i]] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < d.blocks.size(); ++i) {
    claim(d.blocks[i].id());
    p.block[d.blocks[i].id()] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < d.outputs.size(); ++i) {
    claim(d.outputs[i]);
    p.output[d.outputs[i]] = static_cast<int>(i);
  }
  return p;
}

struct Wiring {
  Matrix uv, ur, yv, yr;
};

Wiring wire(const BlockDiagram& d, const Ports& p) {
  const Eigen::Index m = d.blocks.size(), nr = d.inputs.size(), ny = d.outputs.size();
  Wiring w{Matrix::Zero(m, m), Matrix::Zero(m, nr), Matrix::Zero(ny, m), Matrix::Zero(ny, nr)};
  for (const auto& c : d.connections) {
    if (!std::isfinite(c.gain)) invalid("non-finite connection gain");
    const auto fi = p.input.find(c.from);
    const auto fb = p.block.find(c.from);
    const auto tb = p.block.find(c.to);
    const auto to = p.output.find(c.to);
    if (fi == p.input.end() && fb == p.block.end())
      invalid("connection source '" + c.from + "' is not an input or block");
    if (tb == p.block.end() && to == p.output.end())
      invalid("connection target '" + c.to + "' is not a block or output");
    if (tb != p.block.end()) {
      if (fb != p.block.end()) w.uv(tb->second, fb->second) += c.gain;
      else w.ur(tb->second, fi->second) += c.gain;
    } else {
      if (fb != p.block.end()) w.yv(to->second, fb->second) += c.gain;
      else w.yr(to->second, fi->second) += c.gain;
    }
  }
  return w;
}

struct Tunable {
  std::string block;
  std::string param;
  int block_index;
  Bounds bounds;
  double value;
};

std::vector<Tunable> collect_tunables(const BlockDiagram& d) {
  std::vector<Tunable> out;
  for (std::size_t i = 0; i < d.blocks.size(); ++i) {
    const auto& b = d.blocks[i];
    for (const auto& [name, bounds] : b.tunables())
      out.push_back({b.id(), name, static_cast<int>(i), bounds, b.param(name)});
  }
  std::sort(out.begin(), out.end(), [](const Tunable& a, const Tunable& b) {
    return std::tie(a.block, a.param) < std::tie(b.block, b.param);
  });
  return out;
}

bool keeps_states(const Block& b) {
  if (b.kind() != BlockKind::LeadLag) return b.has_states();
  return !b.tunables().empty() || b.param("T_num") != b.param("T_den");
}

StateSpace compose(const std::vector<StateSpace>& parts, const Wiring& w) {
  const Eigen::Index m = parts.size();
  Eigen::Index n = 0;
  for (const auto& s : parts) n += s.states();
  Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, m), c = Matrix::Zero(m, n),
         d = Matrix::Zero(m, m);
  Eigen::Index off = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& s = parts[j];
    const Eigen::Index k = s.states();
    a.block(off, off, k, k) = s.a();
    b.block(off, j, k, 1) = s.b();
    c.block(j, off, 1, k) = s.c();
    d(j, j) = s.d()(0, 0);
    off += k;
  }
  const Matrix loop = Matrix::Identity(m, m) - w.uv * d;
  Eigen::PartialPivLU<Matrix> lu(loop);
  if (m > 0 && !(lu.rcond() >= 1e-12))
    throw Error(ErrorKind::IllPosedLoop, "algebraic loop in block diagram is singular");
  const Matrix l_uv = m > 0 ? Matrix(lu.solve(w.uv)) : Matrix(0, 0);
  const Matrix l_ur = m > 0 ? Matrix(lu.solve(w.ur)) : Matrix(0, w.ur.cols());
  // u = L W_uv C x + L W_ur r,  v = C x + D u
  const Matrix ux = l_uv * c;
  const Matrix vx = c + d * ux;
  const Matrix vr = d * l_ur;
  return StateSpace(a + b * ux, b * l_ur, w.yv * vx, w.yv * vr + w.yr);
}

}  // namespace

const char* to_string(BlockKind kind) { return info(kind).name; }

std::optional<BlockKind> block_kind_from_string(const std::string& s) {
  for (const auto& k : kind_table())
    if (s == k.name) return k.kind;
  if (s == "lag") return BlockKind::FirstOrderLag;
  return std::nullopt;
}

const std::vector<std::string>& block_param_names(BlockKind kind) { return info(kind).params; }

Block::Block(std::string id, BlockKind kind, std::map<std::string, double> params)
    : id_(std::move(id)), kind_(kind), params_(std::move(params)) {
  for (const auto& p : info(kind_).params)
    if (!params_.count(p)) invalid("block '" + id_ + "' lacks parameter " + p);
  for (const auto& [name, v] : params_) {
    const auto& names = info(kind_).params;
    if (std::find(names.begin(), names.end(), name) == names.end())
      invalid("block '" + id_ + "' has unknown parameter " + name);
    (void)v;
  }
  validate();
}

Block Block::gain(std::string id, double k) { return Block(std::move(id), BlockKind::Gain, {{"K", k}}); }
Block Block::inverse_gain(std::string id, double r) {
  return Block(std::move(id), BlockKind::InverseGain, {{"R", r}});
}
Block Block::integrator(std::string id, double k) {
  return Block(std::move(id), BlockKind::Integrator, {{"K", k}});
}
Block Block::lag(std::string id, double k, double t) {
  return Block(std::move(id), BlockKind::FirstOrderLag, {{"K", k}, {"T", t}});
}
Block Block::lead_lag(std::string id, double t_num, double t_den) {
  return Block(std::move(id), BlockKind::LeadLag, {{"T_num", t_num}, {"T_den", t_den}});
}
Block Block::washout(std::string id, double k, double t_w) {
  return Block(std::move(id), BlockKind::Washout, {{"K", k}, {"T_w", t_w}});
}
Block Block::derivative_lag(std::string id, double k, double t) {
  return Block(std::move(id), BlockKind::DerivativeLag, {{"K", k}, {"T", t}});
}
Block Block::notch(std::string id, double a1, double a2) {
  return Block(std::move(id), BlockKind::Notch, {{"A_1", a1}, {"A_2", a2}});
}
Block Block::limiter(std::string id, double lo, double hi) {
  return Block(std::move(id), BlockKind::Limiter, {{"min", lo}, {"max", hi}});
}

Block& Block::tune(const std::string& param, double lower, double upper) {
  if (!params_.count(param)) invalid("block '" + id_ + "' has no parameter " + param);
  if (kind_ == BlockKind::Limiter) invalid("limiter bounds are not tunable");
  tunables_[param] = Bounds{lower, upper};
  validate();
  return *this;
}

double Block::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) invalid("block '" + id_ + "' has no parameter " + name);
  return it->second;
}

bool Block::has_states() const {
  switch (kind_) {
    case BlockKind::Gain:
    case BlockKind::InverseGain:
    case BlockKind::Limiter:
      return false;
    case BlockKind::LeadLag:
      return param("T_num") != param("T_den");
    default:
      return true;
  }
}

Block Block::with_param(const std::string& name, double value) const {
  Block b = *this;
  if (!b.params_.count(name)) invalid("block '" + id_ + "' has no parameter " + name);
  b.params_[name] = value;
  return b;
}

void Block::validate() const {
  for (const auto& [name, v] : params_) {
    if (kind_ == BlockKind::Limiter) {
      if (std::isnan(v)) invalid("limiter '" + id_ + "' bound is NaN");
    } else if (!std::isfinite(v)) {
      invalid("block '" + id_ + "' parameter " + name + " is not finite");
    }
    if (is_time_constant(kind_, name) && !(v > 0.0))
      invalid("block '" + id_ + "' time constant " + name + " must be positive");
  }
  if (kind_ == BlockKind::Limiter && !(param("min") < param("max")))
    invalid("limiter '" + id_ + "' needs min < max");
  if (kind_ == BlockKind::InverseGain && param("R") == 0.0)
    invalid("inverse gain '" + id_ + "' has R = 0");
  if (kind_ == BlockKind::Notch && !(param("A_2") > 0.0 && param("A_1") >= 0.0))
    invalid("notch '" + id_ + "' needs A_2 > 0 and A_1 >= 0");
  for (const auto& [name, bnd] : tunables_) {
    if (!params_.count(name)) invalid("tunable tag " + name + " is not a parameter");
    if (!(std::isfinite(bnd.lower) && std::isfinite(bnd.upper) && bnd.lower <= bnd.upper))
      invalid("block '" + id_ + "' parameter " + name + " has invalid bounds");
    if (is_time_constant(kind_, name) && !(bnd.lower > 0.0))
      invalid("block '" + id_ + "' time constant " + name + " needs a positive lower bound");
    if (kind_ == BlockKind::Notch && name == "A_2" && !(bnd.lower > 0.0))
      invalid("notch '" + id_ + "' A_2 needs a positive lower bound");
    if (kind_ == BlockKind::InverseGain && bnd.lower <= 0.0 && bnd.upper >= 0.0)
      invalid("inverse gain '" + id_ + "' bounds contain 0");
    const double v = param(name);
    if (v < bnd.lower || v > bnd.upper)
      invalid("block '" + id_ + "' parameter " + name + " lies outside its bounds");
  }
}

StateSpace block_to_ss(const Block& b) { return realize(b, true); }

BlockDiagram BlockDiagram::chain(std::string input, std::vector<Block> blocks, std::string output) {
  BlockDiagram d;
  d.inputs = {input};
  d.outputs = {output};
  std::string prev = input;
  for (auto& b : blocks) {
    d.connections.push_back({prev, b.id(), 1.0});
    prev = b.id();
  }
  d.connections.push_back({prev, output, 1.0});
  d.blocks = std::move(blocks);
  return d;
}

void BlockDiagram::validate() const {
  for (const auto& b : blocks) b.validate();
  const Ports p = index_ports(*this);
  const Wiring w = wire(*this, p);
  std::vector<StateSpace> parts;
  for (const auto& b : blocks) parts.push_back(realize(b, false));
  compose(parts, w);
}

ParamSystem assemble(const BlockDiagram& diag, const std::string& prefix) {
  diag.validate();
  const Ports ports = index_ports(diag);
  const Wiring w = wire(diag, ports);
  const auto tun = collect_tunables(diag);
  std::vector<std::string> names;
  Vector lo(tun.size()), hi(tun.size());
  for (std::size_t i = 0; i < tun.size(); ++i) {
    names.push_back(prefix + tun[i].block + "." + tun[i].param);
    lo(i) = tun[i].bounds.lower;
    hi(i) = tun[i].bounds.upper;
  }
  std::vector<bool> keep;
  for (const auto& b : diag.blocks) keep.push_back(keeps_states(b));
  const std::vector<Block> blocks = diag.blocks;
  auto eval = [blocks, tun, w, keep](const Vector& k) {
    std::vector<StateSpace> parts;
    parts.reserve(blocks.size());
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      Block b = blocks[j];
      for (std::size_t i = 0; i < tun.size(); ++i)
        if (tun[i].block_index == static_cast<int>(j)) b = b.with_param(tun[i].param, k(i));
      // Physical invariants only; the box is not enforced here.
      for (const auto& [name, v] : b.params())
        if (is_time_constant(b.kind(), name) && !(v > 0.0))
          invalid("time constant " + b.id() + "." + name + " is not positive");
      parts.push_back(realize(b, !keep[j]));
    }
    return compose(parts, w);
  };
  return ParamSystem(std::move(names), std::move(lo), std::move(hi), std::move(eval));
}

Vector nominal_parameters(const BlockDiagram& diag) {
  const auto tun = collect_tunables(diag);
  Vector k(tun.size());
  for (std::size_t i = 0; i < tun.size(); ++i) k(i) = tun[i].value;
  return k;
}

DiagramDynamics::DiagramDynamics(const BlockDiagram& diag, const Vector& k) {
  const ParamSystem ps = assemble(diag);
  linear_ = ps(k);
  const Ports ports = index_ports(diag);
  const Wiring w = wire(diag, ports);
  w_uv_ = w.uv;
  w_ur_ = w.ur;
  w_yv_ = w.yv;
  w_yr_ = w.yr;
  const auto tun = collect_tunables(diag);
  const int m = static_cast<int>(diag.blocks.size());
  bool any_limiter = false;
  for (int j = 0; j < m; ++j) {
    Block b = diag.blocks[j];
    for (std::size_t i = 0; i < tun.size(); ++i)
      if (tun[i].block_index == j) b = b.with_param(tun[i].param, k(i));
    Compiled c{realize(b, !keeps_states(diag.blocks[j])), n_, false, 0.0, 0.0};
    if (b.kind() == BlockKind::Limiter) {
      c.limiter = true;
      c.lo = b.param("min");
      c.hi = b.param("max");
      any_limiter = true;
    }
    n_ += c.ss.states();
    blocks_.push_back(std::move(c));
  }
  // Kahn's algorithm over feedthrough dependencies.
  std::vector<int> indeg(m, 0);
  auto feeds = [&](int j) { return blocks_[j].ss.d()(0, 0) != 0.0 || blocks_[j].limiter; };
  for (int j = 0; j < m; ++j)
    if (feeds(j))
      for (int i = 0; i < m; ++i)
        if (w_uv_(j, i) != 0.0 && feeds(i)) ++indeg[j];
  std::vector<int> ready;
  for (int j = 0; j < m; ++j)
    if (indeg[j] == 0) ready.push_back(j);
  while (!ready.empty()) {
    const int i = ready.front();
    ready.erase(ready.begin());
    order_.push_back(i);
    if (!feeds(i)) continue;
    for (int j = 0; j < m; ++j)
      if (feeds(j) && w_uv_(j, i) != 0.0 && --indeg[j] == 0) ready.push_back(j);
  }
  if (static_cast<int>(order_.size()) != m) {
    if (any_limiter)
      throw Error(ErrorKind::IllPosedLoop, "limiter inside a delay-free algebraic loop");
    order_.clear();
  }
}

void DiagramDynamics::evaluate(const Vector& x, const Vector& r, Vector& dx, Vector& y) const {
  if (order_.empty() && !blocks_.empty()) {
    dx = linear_.a() * x + linear_.b() * r;
    y = linear_.c() * x + linear_.d() * r;
    return;
  }
  const Eigen::Index m = blocks_.size();
  Vector v = Vector::Zero(m), u = Vector::Zero(m);
  // Outputs of blocks without feedthrough are known from the state alone.
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& b = blocks_[j];
    if (!b.limiter && b.ss.d()(0, 0) == 0.0)
      v(j) = (b.ss.c() * x.segment(b.offset, b.ss.states()))(0);
  }
  for (int j : order_) {
    const auto& b = blocks_[j];
    u(j) = w_uv_.row(j).dot(v) + w_ur_.row(j).dot(r);
    if (b.limiter) {
      v(j) = std::clamp(u(j), b.lo, b.hi);
    } else if (b.ss.d()(0, 0) != 0.0) {
      v(j) = (b.ss.c() * x.segment(b.offset, b.ss.states()))(0) + b.ss.d()(0, 0) * u(j);
    }
  }
  u = w_uv_ * v + w_ur_ * r;
  dx.resize(n_);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& b = blocks_[j];
    const Eigen::Index k = b.ss.states();
    if (k == 0) continue;
    dx.segment(b.offset, k) = b.ss.a() * x.segment(b.offset, k) + b.ss.b() * u(j);
  }
  y = w_yv_ * v + w_yr_ * r;
}

StateSpace realize_transfer_matrix(int rows, int cols, const std::vector<RationalEntry>& entries) {
  if (rows <= 0 || cols <= 0) invalid("transfer matrix needs positive dimensions");
  std::vector<StateSpace> parts;
  Matrix d = Matrix::Zero(rows, cols);
  Eigen::Index n = 0;
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
      invalid("transfer matrix entry index out of range");
    auto strip = [](std::vector<double> p) {
      std::size_t i = 0;
      while (i + 1 < p.size() && p[i] == 0.0) ++i;
      return std::vector<double>(p.begin() + i, p.end());
    };
    std::vector<double> num = strip(e.num), den = strip(e.den);
    if (den.empty() || den[0] == 0.0) invalid("transfer matrix entry has zero denominator");
    if (num.empty()) num = {0.0};
    if (num.size() > den.size()) invalid("improper transfer matrix entry");
    const std::size_t order = den.size() - 1;
    const double lead = den[0];
    for (auto& v : den) v /= lead;
    for (auto& v : num) v /= lead;
    std::vector<double> b(order + 1, 0.0);
    std::copy(num.begin(), num.end(), b.begin() + (order + 1 - num.size()));
    const double d0 = b[0];
    d(e.row, e.col) += d0;
    if (order == 0) continue;
    Matrix a = Matrix::Zero(order, order), bb = Matrix::Zero(order, 1), c(1, order);
    for (std::size_t i = 0; i + 1 < order; ++i) a(i, i + 1) = 1.0;
    for (std::size_t i = 0; i < order; ++i) {
      a(order - 1, i) = -den[order - i];
      c(0, i) = b[order - i] - d0 * den[order - i];
    }
    bb(order - 1, 0) = 1.0;
    Matrix bfull = Matrix::Zero(order, cols), cfull = Matrix::Zero(rows, order);
    bfull.col(e.col) = bb;
    cfull.row(e.row) = c;
    parts.emplace_back(a, bfull, cfull, Matrix::Zero(rows, cols));
    n += order;
  }
  Matrix a = Matrix::Zero(n, n), b(n, cols), c(rows, n);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    const Eigen::Index k = p.states();
    a.block(off, off, k, k) = p.a();
    b.middleRows(off, k) = p.b();
    c.middleCols(off, k) = p.c();
    off += k;
  }
  return StateSpace(a, b, c, d);
}

void DroopInverter::validate() const {
  if (id.empty() || id.find('.') != std::string::npos) invalid("inverter id must be nonempty without '.'");
  if (!(k_p > 0.0 && k_q > 0.0)) invalid("inverter '" + id + "' needs K_P, K_Q > 0");
  if (!(t_f >= 0.05 && t_v >= 0.05)) invalid("inverter '" + id + "' needs T_f, T_v >= 0.05 s");
  if (!(rating > 0.0 && omega_base > 0.0)) invalid("inverter '" + id + "' needs positive rating and base");
  if (!(std::isfinite(omega_c) && std::isfinite(v_c))) invalid("inverter '" + id + "' setpoints not finite");
  if (!(omega_min < omega_max && v_min < v_max)) invalid("inverter '" + id + "' limits need min < max");
  auto check = [&](const Bounds& b, double v, double floor, const char* name) {
    if (!(b.lower <= b.upper && std::isfinite(b.lower) && std::isfinite(b.upper)))
      invalid("inverter '" + id + "' " + name + " has invalid bounds");
    if (!(b.lower >= floor && b.lower > 0.0))
      invalid("inverter '" + id + "' " + name + " lower bound violates its floor");
    if (v < b.lower || v > b.upper) invalid("inverter '" + id + "' " + name + " lies outside its bounds");
  };
  check(k_p_bounds, k_p, 0.0, "K_P");
  check(k_q_bounds, k_q, 0.0, "K_Q");
  check(t_f_bounds, t_f, 0.05, "T_f");
  check(t_v_bounds, t_v, 0.05, "T_v");
}

ParamSystem droop_inverter_model(const DroopInverter& inv) {
  inv.validate();
  std::vector<std::string> names = {inv.id + ".K_P", inv.id + ".K_Q", inv.id + ".T_f", inv.id + ".T_v"};
  Vector lo(4), hi(4);
  lo << inv.k_p_bounds.lower, inv.k_q_bounds.lower, inv.t_f_bounds.lower, inv.t_v_bounds.lower;
  hi << inv.k_p_bounds.upper, inv.k_q_bounds.upper, inv.t_f_bounds.upper, inv.t_v_bounds.upper;
  const double wb = inv.omega_base;
  return ParamSystem(std::move(names), lo, hi, [wb](const Vector& k) {
    const double kp = k(0), kq = k(1), tf = k(2), tv = k(3);
    if (!(tf > 0.0 && tv > 0.0)) invalid("inverter time constants must be positive");
    Matrix a = Matrix::Zero(3, 3), b = Matrix::Zero(3, 2), c = Matrix::Zero(3, 3);
    a(0, 0) = -1.0 / tf;
    a(1, 0) = wb;
    a(2, 2) = -1.0 / tv;
    b(0, 0) = -kp / tf;
    b(2, 1) = -kq / tv;
    c(0, 1) = 1.0;
    c(1, 2) = 1.0;
    c(2, 0) = 1.0;
    return StateSpace(a, b, c, Matrix::Zero(3, 2));
  });
}

}  // namespace hinftune
