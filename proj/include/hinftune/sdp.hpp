#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hinftune::sdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Block-diagonal problem in LMI (dual) form:
//
//   maximize   b'y
//   subject to S = C - sum_i y_i A_i  >= 0      (every block)
//
// whose primal is  min <C, X>  s.t. <A_i, X> = b_i, X >= 0.
// Constraint matrices are stored sparsely by block.
struct Problem {
  struct Term {
    int block;
    Matrix mat;  // symmetric, block_dims[block] square
  };

  std::vector<int> block_dims;
  std::vector<Matrix> c;                 // one per block
  std::vector<std::vector<Term>> a;      // one list per variable
  Vector b;

  int variables() const { return static_cast<int>(b.size()); }
  int add_block(int dim);
  void add_term(int variable, int block, Matrix mat);
};

struct Options {
  double gap_tol = 1e-7;         // relative duality gap
  double feas_tol = 1e-8;        // relative primal / dual infeasibility
  int max_iter = 200;
  double step_fraction = 0.95;
};

enum class Status { Optimal, MaxIter, Failed };

struct Result {
  Status status = Status::Failed;
  Vector y;
  std::vector<Matrix> x;
  std::vector<Matrix> s;
  double primal_objective = 0.0;  // <C, X>
  double dual_objective = 0.0;    // b'y
  double rel_gap = 0.0;
  int iterations = 0;
};

// Primal-dual path-following method with the HKM search direction and a
// Mehrotra predictor-corrector step. A dual point y0 with C - A*(y0) > 0
// may be passed to start dual-feasible.
Result solve(const Problem& prob, const Options& opts = {}, const Vector* y0 = nullptr);

}  // namespace hinftune::sdp
