#include "hinftune/param_system.hpp"

#include <algorithm>

namespace hinftune {

ParamSystem::ParamSystem(std::vector<std::string> names, Vector lower, Vector upper, Eval eval)
    : names_(std::move(names)), lower_(std::move(lower)), upper_(std::move(upper)),
      eval_(std::move(eval)) {
  if (static_cast<Eigen::Index>(names_.size()) != lower_.size() || lower_.size() != upper_.size())
    throw Error(ErrorKind::InvalidArgument, "parameter names and bounds differ in length");
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_(i) <= upper_(i)))
      throw Error(ErrorKind::InvalidArgument, "empty box for parameter " + names_[i]);
  }
  if (!eval_) throw Error(ErrorKind::InvalidArgument, "parameterized system without evaluator");
}

StateSpace ParamSystem::operator()(const Vector& k) const {
  if (k.size() != size())
    throw Error(ErrorKind::InvalidArgument, "parameter vector has length " +
                                                std::to_string(k.size()) + ", expected " +
                                                std::to_string(size()));
  return eval_(k);
}

bool ParamSystem::in_box(const Vector& k, double tol) const {
  if (k.size() != size()) return false;
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    const double slack = tol * std::max(1.0, std::abs(upper_(i) - lower_(i)));
    if (k(i) < lower_(i) - slack || k(i) > upper_(i) + slack) return false;
  }
  return true;
}

Vector ParamSystem::clamp(const Vector& k) const {
  return k.cwiseMax(lower_).cwiseMin(upper_);
}

int ParamSystem::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

ParamSystem ParamSystem::select_outputs(std::vector<int> rows) const {
  Eval inner = eval_;
  return ParamSystem(names_, lower_, upper_, [inner, rows](const Vector& k) {
    const StateSpace full = inner(k);
    Matrix c(rows.size(), full.states()), d(rows.size(), full.inputs());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0 || rows[i] >= full.outputs())
        throw Error(ErrorKind::InvalidArgument, "output row out of range");
      c.row(i) = full.c().row(rows[i]);
      d.row(i) = full.d().row(rows[i]);
    }
    return StateSpace(full.a(), full.b(), c, d);
  });
}

}  // namespace hinftune
