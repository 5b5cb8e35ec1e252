#pragma once

#include <iosfwd>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "mecslice/scenario.hpp"

namespace mecslice {

/// Decision variables of the joint problem.
///   x: users x subchannels, subchannel ownership in [0,1]
///   p: users x subchannels, transmit power (W)
///   f: users x servers, CPU speed granted on each server (cycles/s)
///   y: users x (1+servers), task split; column 0 is local execution
struct AllocationState {
  Eigen::MatrixXd x;
  Eigen::MatrixXd p;
  Eigen::MatrixXd f;
  Eigen::MatrixXd y;

  /// Everything zero except y(:,0) = 1 (all local).
  static AllocationState all_local(const Scenario& s);
};

inline constexpr double kInfiniteDelay = std::numeric_limits<double>::infinity();

struct UserDelay {
  double comm = 0.0;
  double local = 0.0;
  double handoff = 0.0;
  double edge_compute = 0.0;
  double total = 0.0;
  double deviation = 0.0;  // total - slice target
};

struct DelayBreakdown {
  std::vector<UserDelay> users;
  /// Mean of (T_u - target) over the members of each slice.
  std::vector<double> slice_mean_deviation;
  /// False when some user carries the infinite-delay marker.
  bool finite = true;
};

/// Inter-cell interference seen by user u on subchannel n (W).
double interference(const Scenario& s, const AllocationState& a, std::size_t u,
                    std::size_t n);

/// Shannon rate of user u on subchannel n (bits/s).
double subchannel_rate(const Scenario& s, const AllocationState& a,
                       std::size_t u, std::size_t n);

/// R_u, summed over subchannels (bits/s).
double rate(const Scenario& s, const AllocationState& a, std::size_t u);
std::vector<double> rates(const Scenario& s, const AllocationState& a);

/// Per-user delay components. Users that offload with zero rate, or place
/// work on a server with zero granted speed, get kInfiniteDelay.
DelayBreakdown delays(const Scenario& s, const AllocationState& a);

/// Weighted delay deviation sum_k sum_{u in k} lambda_k (T_u - target_k).
/// +infinity when any user is infeasible.
double objective(const Scenario& s, const AllocationState& a);
double objective(const Scenario& s, const DelayBreakdown& breakdown);

/// Largest violation per constraint family. Counting families (reuse,
/// binary, spectrum) are in subchannels; power is relative to P_max,u;
/// local and server budgets are relative to the task cycles and the server
/// cycle budget; compute quota is relative to the summed server speed.
struct ConstraintReport {
  double reuse = 0.0;          // sum_{u in cell j} x_{u,n} <= 1
  double binary = 0.0;         // distance of x to {0,1}
  double power = 0.0;          // sum_n p <= P_max, p >= 0
  double coupling = 0.0;       // p <= x * P_max
  double local_budget = 0.0;   // y0 L C <= F^L
  double server_budget = 0.0;  // sum_u y_j L C <= cycle budget of j
  double spectrum = 0.0;       // sum_{u in k} sum_n x <= alpha_k M N
  double compute_quota = 0.0;  // sum_{u in k} sum_j f <= beta_k S^E, f >= 0
  double simplex = 0.0;        // y >= 0, y <= 1, rows sum to 1

  double max() const;
};

ConstraintReport constraint_report(const Scenario& s, const AllocationState& a);

/// CSV rows: user_id,slice_id,comm,local,handoff,edge,total,deviation
void write_breakdown_csv(std::ostream& out, const Scenario& s,
                         const DelayBreakdown& breakdown);

}  // namespace mecslice
