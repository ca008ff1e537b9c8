#pragma once

#include <vector>

#include "hinftune/lti.hpp"
#include "hinftune/param_system.hpp"

namespace hinftune {

// First-order model G_L(K, jw) = base(w) + sum_i sens[w][i] (K_i - anchor_i)
// sampled at the grid frequencies.
struct AffineResponseModel {
  Vector anchor;
  std::vector<double> omegas;
  std::vector<CMatrix> base;               // per frequency
  std::vector<std::vector<CMatrix>> sens;  // per frequency, per parameter

  std::size_t frequencies() const { return omegas.size(); }
  Eigen::Index parameters() const { return anchor.size(); }

  std::vector<CMatrix> evaluate(const Vector& k) const;
  // max_w sigma_max(G_L(K, jw))
  double peak(const Vector& k) const;
};

// Central differences of the state-space matrices with step
// h_i = max(1e-6 |K_i|, 1e-8), pushed through the resolvent.
AffineResponseModel linearize_response(const ParamSystem& sys, const Vector& k_anchor,
                                       const FrequencyGrid& grid);

struct SubproblemSpec {
  // All models share the anchor; their constraints are stacked.
  std::vector<AffineResponseModel> models;
  Vector k_min, k_max;
  Vector delta_k;
  double tol = 1e-7;
  int max_iter = 200;
};

struct SubproblemSolution {
  enum class Status { Optimal, MaxIter, Infeasible };

  Vector k_next;
  double gamma = kInf;  // peak of the affine models at k_next
  Status status = Status::Infeasible;
  int iterations = 0;
};

const char* to_string(SubproblemSolution::Status status);

// min gamma s.t. Phi(G_L(K, jw), gamma) >= 0 for every sample, K in the box
// and |K - anchor| <= delta_k.
SubproblemSolution solve_subproblem(const SubproblemSpec& spec);

}  // namespace hinftune
