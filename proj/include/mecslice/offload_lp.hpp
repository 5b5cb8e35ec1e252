#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mecslice/perf_model.hpp"
#include "mecslice/scenario.hpp"

namespace mecslice {

/// The offloading LP (or the scenario under the current allocation) has no
/// feasible split. `binding_row()` names the constraint that cannot be met,
/// e.g. "server_budget[1]" or "user[3]".
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(std::string binding_row, const std::string& what)
      : std::runtime_error(what), binding_row_(std::move(binding_row)) {}
  const std::string& binding_row() const noexcept { return binding_row_; }

 private:
  std::string binding_row_;
};

/// One usable (user, column) pair; column 0 is local, column j+1 is server j.
struct OffloadColumn {
  std::size_t user = 0;
  std::size_t column = 0;
  double delay_per_unit = 0.0;  // seconds of T_u per unit of y
  double weight = 1.0;          // lambda of the user's slice

  double cost() const { return weight * delay_per_unit; }
};

/// Offloading-fraction LP for frozen (X, P, F):
///   minimize   sum cost * y
///   subject to sum_j y_{u,j} = 1                      (per user)
///              y_{u,0} <= local_cap[u]                (local cycle budget)
///              sum_u y_{u,j+1} cycles_u <= budget_j   (server cycle budget)
///              y >= 0
/// The slice targets are constants and are dropped from the objective.
struct OffloadLp {
  std::size_t num_users = 0;
  std::size_t num_servers = 0;
  std::vector<OffloadColumn> columns;  // user-major; servers first, then local
  std::vector<double> local_cap;       // F^L_u / (L_u C_u)
  std::vector<double> task_cycles;     // L_u C_u
  std::vector<double> server_budget;   // cycles
};

/// Assembles the LP from the current allocation. Pairs with zero rate (for
/// servers) or zero granted speed are left out of the variable set. With
/// `cooperation` false only the local and serving-server columns exist.
/// Throws InfeasibleError when a user has no usable column at all.
OffloadLp build_offload_lp(const Scenario& s, const AllocationState& a,
                           bool cooperation = true);

/// Exact optimum of the LP as a users x (1 + servers) matrix.
/// Throws InfeasibleError naming the binding capacity row.
Eigen::MatrixXd solve_offload_lp(const OffloadLp& lp);

/// LP objective of a split (ignores columns outside the variable set).
double offload_lp_objective(const OffloadLp& lp, const Eigen::MatrixXd& y);

/// CPLEX-style LP text for cross-checking with external solvers.
void write_lp_format(std::ostream& out, const OffloadLp& lp);

}  // namespace mecslice
