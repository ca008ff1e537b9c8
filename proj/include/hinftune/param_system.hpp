#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hinftune/lti.hpp"

namespace hinftune {

// A family of state-space systems indexed by a tunable parameter vector with
// box bounds. Evaluation is pure and may be called concurrently.
class ParamSystem {
 public:
  using Eval = std::function<StateSpace(const Vector&)>;

  ParamSystem() = default;
  ParamSystem(std::vector<std::string> names, Vector lower, Vector upper, Eval eval);

  StateSpace operator()(const Vector& k) const;

  const std::vector<std::string>& names() const { return names_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Eigen::Index size() const { return lower_.size(); }

  bool in_box(const Vector& k, double tol = 0.0) const;
  Vector clamp(const Vector& k) const;
  int index_of(const std::string& name) const;  // -1 when absent

  // Same family with outputs replaced by rows `rows` of the original outputs.
  ParamSystem select_outputs(std::vector<int> rows) const;

 private:
  std::vector<std::string> names_;
  Vector lower_, upper_;
  Eval eval_;
};

}  // namespace hinftune
