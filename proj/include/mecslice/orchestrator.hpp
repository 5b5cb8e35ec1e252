#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mecslice/fp_alm.hpp"
#include "mecslice/offload_lp.hpp"
#include "mecslice/perf_model.hpp"
#include "mecslice/scenario.hpp"

namespace mecslice {

struct SolveOptions {
  int outer_cap = 20;
  double obj_tol = 1e-4;   // relative change of the reported objective
  double feas_tol = 1e-6;  // certificate tolerance of the final state
  double bin_tol = 1e-3;   // |x - round(x)| counted as binary in the trace
  std::uint64_t seed = 0;
  bool cooperation = true;
  P2Options p2;
};

struct Solution {
  std::string scheme = "PROPOSED";
  AllocationState allocation;  // x exactly binary
  double objective = 0.0;      // weighted delay deviation of `allocation`
  DelayBreakdown breakdown;
  ConstraintReport report;
  RunTrace trace;
  /// Best reported objective after each outer iteration.
  std::vector<double> objective_history;
  int outer_iterations = 0;
  bool converged = false;
  /// Largest |x - round(x)| of the relaxed subchannel variables before rounding.
  double rounding_gap = 0.0;
  std::uint64_t seed = 0;
  /// Which start produced the reported iterate.
  std::string start;
  /// Baselines: the blocks held fixed and their values.
  std::string frozen;
};

/// How a start spreads each slice's compute quota.
enum class ComputeSplit {
  kServingServer,  // equally over the slice's users, on their serving servers
  kAllServers,     // equally over the slice's users and all servers
  /// The serving-server share on every server. Over-subscribes the quota by
  /// the number of servers; the first resource step brings it back. Lets the
  /// first offloading split price every server at a realistic speed.
  kMirrored,
};

/// Deterministic fractional start: every user of slice k holds
/// min(1, alpha_k M N / (U_k N)) of each subchannel and spends P_max/N on
/// each held subchannel (capped by x P_max).
AllocationState fair_share_init(const Scenario& s,
                                ComputeSplit split = ComputeSplit::kAllServers);

/// Binary start: in every cell subchannel n goes to the next member
/// (cyclic, by user index) whose slice still has spectrum quota, and each
/// user spreads P_max evenly over the subchannels it holds.
AllocationState round_robin_assignment(const Scenario& s,
                                       ComputeSplit split = ComputeSplit::kAllServers);

struct NamedStart {
  std::string name;
  AllocationState state;
};

/// fair_share and round_robin with the serving-server split, plus both with
/// the all-server and the mirrored split when there is more than one server.
/// The same list serves the cooperative and the non-cooperative solve, so
/// the two differ only in the servers the offloading split may use.
std::vector<NamedStart> default_starts(const Scenario& s);

/// Rounds x to {0,1} and restores exact feasibility. A subchannel counts as
/// held when x >= 0.5 or the user transmits on it (p > 0). Per (cell,
/// subchannel) and per slice spectrum quota the holders with the largest
/// p*h are kept and the others lose x and p; power and compute are then
/// scaled into their budgets. y is taken as given.
AllocationState round_and_repair(const Scenario& s, const AllocationState& a,
                                 const Eigen::MatrixXd& y);

/// Alternates the offloading LP and the resource subproblem from `start`
/// over the free blocks, rounding and certifying each iterate. The reported
/// solution is the best certified iterate. Throws InfeasibleError when no
/// split exists for the start.
Solution solve_from(const Scenario& s, const AllocationState& start,
                    const SolveOptions& opts, BlockMask blocks = {},
                    const AllocationState* incumbent = nullptr);

/// Full joint optimization. Runs from every default start and reports the
/// best certified result (the earlier start on ties). With cooperation and
/// more than one server it also continues from the non-cooperative optimum,
/// so the result is never worse than the non-cooperative solve.
Solution solve(const Scenario& s, const SolveOptions& opts = {});

nlohmann::json solution_to_json(const Scenario& s, const Solution& sol);

}  // namespace mecslice
