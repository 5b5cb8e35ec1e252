#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Core>

namespace mecslice {

/// minimize c'x  s.t.  A_le x <= b_le,  A_eq x = b_eq,  x >= 0
struct LinearProgram {
  Eigen::VectorXd cost;
  Eigen::MatrixXd a_le;
  Eigen::VectorXd b_le;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  /// On infeasibility, the <= row carrying the largest Farkas weight (the
  /// capacity that cannot be met), if any.
  std::optional<std::size_t> binding_le_row;
  /// On infeasibility, the equality row left unsatisfied by phase one.
  std::optional<std::size_t> unmet_eq_row;
};

/// Dense two-phase tableau simplex with Bland's pivoting rule. Meant for the
/// small LPs of the offloading subproblem (a few hundred columns at most).
LpResult solve_simplex(const LinearProgram& lp, double tol = 1e-11);

}  // namespace mecslice
