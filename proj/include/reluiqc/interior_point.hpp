#pragma once

// Primal-dual interior-point method for small dense block-diagonal SDPs,
// computed in extended precision (long double).
//
//   maximize    b'y
//   subject to  Z = C - sum_i y_i A_i  >= 0      (block diagonal)
//
// with the companion problem  minimize <C, X>  s.t.  <A_i, X> = b_i, X >= 0.
// Search direction: HKM, Mehrotra predictor-corrector, infeasible start.

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace reluiqc::ipm {

using Real = long double;
using RMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

struct StandardForm {
  std::vector<RMatrix> C;  ///< one symmetric matrix per block
  /// Nonzero coefficient matrices per block: (variable index, A_i restricted to the block).
  std::vector<std::vector<std::pair<Eigen::Index, RMatrix>>> A;
  RVector b;

  Eigen::Index n_vars() const { return b.size(); }
  Eigen::Index n_blocks() const { return static_cast<Eigen::Index>(C.size()); }
};

enum class Status {
  Optimal,
  Infeasible,  ///< no y makes Z >= 0 (certificate X found)
  Unbounded,   ///< b'y unbounded above (certificate direction found)
  MaxIterations,
  Stalled,  ///< no further progress possible; the last iterate is returned
  NumericalTrouble
};

std::string to_string(Status s);

struct Options {
  int max_iterations = 120;
  Real tolerance = 1e-12L;      ///< relative gap and residual target
  /// On breakdown, the best iterate is returned as Stalled if it is this accurate.
  Real fallback_tolerance = 1e-8L;
  Real infeasibility_tol = 1e-10L;
  Real step_fraction = 0.98L;
  bool verbose = false;
};

struct Result {
  Status status = Status::NumericalTrouble;
  RVector y;
  std::vector<RMatrix> X;
  std::vector<RMatrix> Z;
  Real primal_objective = 0;  ///< <C, X>
  Real dual_objective = 0;    ///< b'y
  Real relative_gap = 0;
  Real primal_infeasibility = 0;  ///< ||b - A(X)|| / (1 + ||b||)
  Real dual_infeasibility = 0;    ///< ||C - Z - A'y|| / (1 + ||C||)
  int iterations = 0;
  std::string message;
};

/// Deterministic: identical inputs give identical iterates.
Result solve(const StandardForm& problem, const Options& options = {});

/// Largest step s in (0, inf] keeping X + s dX >= 0; X must be positive definite.
Real max_step(const RMatrix& X, const RMatrix& dX);

}  // namespace reluiqc::ipm
