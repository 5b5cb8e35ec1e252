#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mecslice/perf_model.hpp"
#include "mecslice/scenario.hpp"

namespace mecslice {

/// Fractional-programming auxiliaries.
///   z: users x subchannels, quadratic-transform slack of each rate term
///   t: per user, sum-of-ratios weight of the communication delay
struct FpAuxiliary {
  Eigen::MatrixXd z;
  Eigen::VectorXd t;
};

/// Multipliers of the augmented Lagrangian, one per constraint row.
///   theta   per user              sum_n p_{u,n} <= P_max,u
///   delta   per slice             sum_{u in k, j} f_{u,j} <= beta_k S^E
///   phi     subchannels x cells   sum_{u in cell j} x_{u,n} <= 1
///   xi      users x subchannels   x - x^2 <= 0 (the cell index is m_u)
///   bigxi   users x subchannels   p_{u,n} <= x_{u,n} P_max,u
///   chi     per slice             sum_{u in k, n} x_{u,n} <= alpha_k M N
/// psi is the penalty coefficient.
struct AlmState {
  Eigen::VectorXd theta;
  Eigen::VectorXd delta;
  Eigen::MatrixXd phi;
  Eigen::MatrixXd xi;
  Eigen::MatrixXd bigxi;
  Eigen::VectorXd chi;
  double psi = 1.0;

  static AlmState zeros(const Scenario& s, double psi = 1.0);
};

/// Per-row constraint residuals g(v) of the rows above, in the scaled units
/// the multipliers act on: power and coupling relative to P_max,u, compute
/// relative to S^E, the x-families in subchannel counts. Positive entries
/// are violations.
struct AlmResiduals {
  Eigen::VectorXd power;
  Eigen::VectorXd compute;
  Eigen::MatrixXd reuse;
  Eigen::MatrixXd binary;
  Eigen::MatrixXd coupling;
  Eigen::VectorXd spectrum;

  double max_violation() const;
};

/// Which variable blocks are free. Rows that only involve frozen blocks are
/// dropped from the Lagrangian. With X frozen and P free the coupling row
/// becomes the box p <= x P_max and is enforced by projection.
struct BlockMask {
  bool x = true;        // subchannel ownership
  bool power = true;    // P
  bool compute = true;  // F

  static BlockMask compute_only() { return {false, false, true}; }
  static BlockMask ran_only() { return {true, true, false}; }
  static BlockMask fixed_assignment() { return {false, true, true}; }
};

AlmResiduals alm_residuals(const Scenario& s, const AllocationState& a,
                           BlockMask blocks = {});

/// [multiplier + psi * residual]^+ elementwise; psi is left unchanged.
AlmState update_multipliers(const AlmState& alm, const AlmResiduals& residuals);

/// Rate of user u on subchannel n after the quadratic transform (bits/s):
/// B log2(1 + max(0, 2 z sqrt(h p) - z^2 (I + sigma^2))), with p the
/// transmitted power and I the inter-cell interference it creates.
double transformed_rate(const Scenario& s, const AllocationState& a,
                        const FpAuxiliary& aux, std::size_t u, std::size_t n);

/// sum_u lambda [t w^2 + 1/(4 t Rhat^2) + handoff + edge compute + local - target]
/// with w the offloaded bits of u and Rhat its transformed rate. +infinity
/// when an offloading user has Rhat <= 0 or a used server has zero speed.
double transformed_objective(const Scenario& s, const AllocationState& a,
                             const Eigen::MatrixXd& y, const FpAuxiliary& aux);

double augmented_lagrangian(const Scenario& s, const AllocationState& a,
                            const Eigen::MatrixXd& y, const FpAuxiliary& aux,
                            const AlmState& alm, BlockMask blocks = {});

/// Closed-form slacks: z = sqrt(p h)/(I + sigma^2), t = 1/(2 w R) for users
/// with offloaded bits w > 0 (t = 1 otherwise, unused).
FpAuxiliary update_slacks(const Scenario& s, const AllocationState& a,
                          const Eigen::MatrixXd& y);

/// Objective with the given split where every positive p_{u,n} counts as
/// transmitted power, i.e. the relaxed subproblem value with X folded into P.
double relaxed_objective(const Scenario& s, const AllocationState& a,
                         const Eigen::MatrixXd& y);

/// The state with x set to 1 wherever p > 0, so that x*p equals p.
AllocationState effective_state(const AllocationState& a);

/// Raised when the Lagrangian gradient is not finite.
class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(Eigen::Index index)
      : std::runtime_error("non-finite augmented Lagrangian gradient at index " +
                           std::to_string(index)),
        index_(index) {}
  Eigen::Index index() const noexcept { return index_; }

 private:
  Eigen::Index index_;
};

/// The augmented Lagrangian as a smooth function of the packed variable
/// vector [x | a | g] for fixed y, auxiliaries and multipliers, where
/// a = sqrt(p / P_max) is the power amplitude and g = f / S^E the
/// normalized compute speed. The amplitude keeps the gradient of
/// sqrt(h p) finite at p = 0 and preserves concavity of the transformed rate.
class AlmProblem {
 public:
  AlmProblem(const Scenario& s, const Eigen::MatrixXd& y, const FpAuxiliary& aux,
             const AlmState& alm, BlockMask blocks = {});

  Eigen::Index size() const { return size_; }
  Eigen::VectorXd pack(const AllocationState& a) const;
  /// Unpacks into a copy of `like` (whose y is replaced by this problem's y).
  AllocationState unpack(const Eigen::VectorXd& v, const AllocationState& like) const;

  /// Projection onto the box 0 <= x <= 1, 0 <= a <= 1, 0 <= g <= beta_k
  /// (a <= sqrt(x) when X is frozen). Frozen blocks are reset to `anchor`.
  void project(Eigen::VectorXd& v) const;

  double value(const Eigen::VectorXd& v) const;
  double value_and_gradient(const Eigen::VectorXd& v, Eigen::VectorXd& grad) const;

  /// Transformed objective part only (no penalty terms).
  double objective_part(const Eigen::VectorXd& v) const;

  void set_anchor(const Eigen::VectorXd& anchor) { anchor_ = anchor; }

 private:
  double evaluate(const Eigen::VectorXd& v, Eigen::VectorXd* grad,
                  bool with_penalty) const;

  Eigen::Index ix(std::size_t u, std::size_t n) const {
    return static_cast<Eigen::Index>(u * n_sub_ + n);
  }
  Eigen::Index ia(std::size_t u, std::size_t n) const {
    return static_cast<Eigen::Index>(n_users_ * n_sub_ + u * n_sub_ + n);
  }
  Eigen::Index ig(std::size_t u, std::size_t j) const {
    return static_cast<Eigen::Index>(2 * n_users_ * n_sub_ + u * n_cells_ + j);
  }

  const Scenario& s_;
  Eigen::MatrixXd y_;
  FpAuxiliary aux_;
  AlmState alm_;
  BlockMask blocks_;
  std::size_t n_users_, n_sub_, n_cells_;
  Eigen::Index size_;
  double total_speed_;
  std::vector<double> offloaded_bits_;  // w_u
  std::vector<double> constant_;        // lambda (handoff + local - target)
  Eigen::MatrixXd compute_coef_;        // lambda y L C / S^E, users x cells
  Eigen::VectorXd anchor_;
};

struct InnerOptions {
  int max_iters = 500;
  double tol = 1e-6;     // infinity norm of the projected-gradient step
  double armijo = 1e-4;  // sufficient-decrease constant
  /// Spectral (Barzilai-Borwein) trial steps; plain halving from a unit
  /// step when false.
  bool spectral_step = true;
};

struct InnerResult {
  AllocationState state;
  int iterations = 0;
  double value = 0.0;
  double projected_gradient_norm = 0.0;
};

/// Projected-gradient descent with monotone Armijo backtracking on the
/// augmented Lagrangian for fixed multipliers. Never returns a state with a
/// larger Lagrangian than `start`.
InnerResult inner_minimize(const Scenario& s, const Eigen::MatrixXd& y,
                           const FpAuxiliary& aux, const AlmState& alm,
                           const AllocationState& start,
                           const InnerOptions& opts = {}, BlockMask blocks = {});

struct P2Options {
  InnerOptions inner;
  int max_alm_rounds = 40;
  int max_fp_iters = 15;
  double feas_tol = 1e-4;   // max residual to stop the multiplier loop
  double obj_tol = 1e-4;    // relative change of the transformed objective
  double psi_init = 1.0;
  double psi_growth = 5.0;
  double psi_max = 1e6;
  double shrink = 0.5;      // required violation reduction per round
  BlockMask blocks;
};

/// One row per slack update of a subproblem solve.
struct TraceRow {
  int outer_iter = 0;   // alternation round of the caller (0 when standalone)
  int fp_iter = 0;
  int alm_rounds = 0;
  int inner_iters = 0;
  double transformed_obj = 0.0;
  double true_obj = 0.0;
  AlmResiduals residuals;
  double psi = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;
};

/// CSV: outer_iter,fp_iter,alm_rounds,inner_iters,transformed_obj,true_obj,
/// viol_power,viol_compute,viol_reuse,viol_binary,viol_coupling,viol_spectrum,psi
void write_trace_csv(std::ostream& out, const RunTrace& trace);

struct P2Result {
  AllocationState state;
  RunTrace trace;
  bool converged = false;
  AlmState multipliers;
};

/// Solves the resource subproblem for fixed y: multiplier loop around
/// inner_minimize, then slack refresh, until the transformed objective
/// settles. Multipliers carry over between slack refreshes and start from
/// `warm` when given (zeros with psi_init otherwise). Returns the iterate
/// with the lowest relaxed objective among those within feas_tol (the start
/// included), or the last iterate when none is. x is not rounded.
P2Result solve_p2(const Scenario& s, const Eigen::MatrixXd& y,
                  const AllocationState& start, const P2Options& opts = {},
                  const AlmState* warm = nullptr);

}  // namespace mecslice
