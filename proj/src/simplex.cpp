#include "mecslice/simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace mecslice {

namespace {

using Index = Eigen::Index;

class Tableau {
 public:
  // Row 0 holds reduced costs; column `rhs_` holds right-hand sides with the
  // negated objective value in row 0.
  Tableau(Index rows, Index cols)
      : t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), rhs_(cols), basis_(rows, -1) {}

  Eigen::MatrixXd& t() { return t_; }
  Index rhs() const { return rhs_; }
  std::vector<Index>& basis() { return basis_; }
  Index rows() const { return t_.rows() - 1; }

  void pivot(Index row, Index col) {
    t_.row(row) /= t_(row, col);
    for (Index r = 0; r < t_.rows(); ++r) {
      if (r == row) continue;
      const double factor = t_(r, col);
      if (factor != 0.0) t_.row(r) -= factor * t_.row(row);
    }
    basis_[static_cast<std::size_t>(row - 1)] = col;
  }

  // Bland's rule. Returns false when unbounded.
  bool optimize(Index allowed_cols, double tol) {
    for (;;) {
      Index enter = -1;
      for (Index j = 0; j < allowed_cols; ++j)
        if (t_(0, j) < -tol) {
          enter = j;
          break;
        }
      if (enter < 0) return true;

      Index leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Index r = 1; r < t_.rows(); ++r) {
        const double a = t_(r, enter);
        if (a <= tol) continue;
        const double ratio = t_(r, rhs_) / a;
        if (ratio < best_ratio - tol ||
            (std::abs(ratio - best_ratio) <= tol && leave > 0 &&
             basis_[static_cast<std::size_t>(r - 1)] <
                 basis_[static_cast<std::size_t>(leave - 1)])) {
          best_ratio = ratio;
          leave = r;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }

 private:
  Eigen::MatrixXd t_;
  Index rhs_;
  std::vector<Index> basis_;
};

}  // namespace

LpResult solve_simplex(const LinearProgram& lp, double tol) {
  const Index n = lp.cost.size();
  const Index m_le = lp.a_le.rows();
  const Index m_eq = lp.a_eq.rows();
  const Index rows = m_le + m_eq;

  // Rows needing an artificial: equalities and <= rows with negative rhs.
  std::vector<bool> flipped(static_cast<std::size_t>(m_le), false);
  Index n_art = m_eq;
  for (Index i = 0; i < m_le; ++i)
    if (lp.b_le(i) < 0.0) {
      flipped[static_cast<std::size_t>(i)] = true;
      ++n_art;
    }

  const Index slack0 = n;
  const Index art0 = n + m_le;
  const Index cols = art0 + n_art;
  Tableau tab(rows, cols);
  auto& t = tab.t();
  const Index rhs = tab.rhs();

  Index art = art0;
  std::vector<Index> art_of_row(static_cast<std::size_t>(rows), -1);
  for (Index i = 0; i < m_le; ++i) {
    const Index r = i + 1;
    const double sign = flipped[static_cast<std::size_t>(i)] ? -1.0 : 1.0;
    t.row(r).head(n) = sign * lp.a_le.row(i);
    t(r, slack0 + i) = sign;
    t(r, rhs) = sign * lp.b_le(i);
    if (flipped[static_cast<std::size_t>(i)]) {
      t(r, art) = 1.0;
      art_of_row[static_cast<std::size_t>(i)] = art;
      tab.basis()[static_cast<std::size_t>(i)] = art++;
    } else {
      tab.basis()[static_cast<std::size_t>(i)] = slack0 + i;
    }
  }
  for (Index i = 0; i < m_eq; ++i) {
    const Index r = m_le + i + 1;
    const double sign = lp.b_eq(i) < 0.0 ? -1.0 : 1.0;
    t.row(r).head(n) = sign * lp.a_eq.row(i);
    t(r, rhs) = sign * lp.b_eq(i);
    t(r, art) = 1.0;
    art_of_row[static_cast<std::size_t>(m_le + i)] = art;
    tab.basis()[static_cast<std::size_t>(m_le + i)] = art++;
  }

  LpResult result;

  // Phase one: minimize the sum of artificials.
  if (n_art > 0) {
    t.row(0).setZero();
    for (Index c = art0; c < cols; ++c) t(0, c) = 1.0;
    for (Index r = 1; r <= rows; ++r)
      if (tab.basis()[static_cast<std::size_t>(r - 1)] >= art0) t.row(0) -= t.row(r);
    tab.optimize(cols, tol);

    const double infeasibility = -t(0, rhs);
    double scale = 1.0;
    for (Index r = 1; r <= rows; ++r) scale = std::max(scale, std::abs(t(r, rhs)));
    if (infeasibility > tol * scale * 10.0) {
      result.status = LpStatus::kInfeasible;
      // Farkas weights of the <= rows are minus the reduced costs of their slacks.
      double best = 0.0;
      for (Index i = 0; i < m_le; ++i) {
        const double w = std::abs(t(0, slack0 + i));
        if (w > best + tol) {
          best = w;
          result.binding_le_row = static_cast<std::size_t>(i);
        }
      }
      double worst = 0.0;
      for (Index r = 1; r <= rows; ++r) {
        const Index b = tab.basis()[static_cast<std::size_t>(r - 1)];
        if (b >= art0 && t(r, rhs) > worst) {
          worst = t(r, rhs);
          for (Index i = 0; i < m_eq; ++i)
            if (art_of_row[static_cast<std::size_t>(m_le + i)] == b)
              result.unmet_eq_row = static_cast<std::size_t>(i);
        }
      }
      return result;
    }

    // Drive zero-level artificials out of the basis where possible.
    for (Index r = 1; r <= rows; ++r) {
      if (tab.basis()[static_cast<std::size_t>(r - 1)] < art0) continue;
      for (Index c = 0; c < art0; ++c)
        if (std::abs(t(r, c)) > tol) {
          tab.pivot(r, c);
          break;
        }
    }
  }

  // Phase two over structural and slack columns only.
  t.row(0).setZero();
  t.row(0).head(n) = lp.cost.transpose();
  for (Index r = 1; r <= rows; ++r) {
    const Index b = tab.basis()[static_cast<std::size_t>(r - 1)];
    if (b < n && lp.cost(b) != 0.0) t.row(0) -= lp.cost(b) * t.row(r);
  }
  if (!tab.optimize(art0, tol)) {
    result.status = LpStatus::kUnbounded;
    return result;
  }

  result.status = LpStatus::kOptimal;
  result.x = Eigen::VectorXd::Zero(n);
  for (Index r = 1; r <= rows; ++r) {
    const Index b = tab.basis()[static_cast<std::size_t>(r - 1)];
    if (b < n) result.x(b) = std::max(0.0, t(r, rhs));
  }
  result.objective = lp.cost.dot(result.x);
  return result;
}

}  // namespace mecslice
