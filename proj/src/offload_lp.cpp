#include "mecslice/offload_lp.hpp"

#include <cmath>
#include <ostream>

#include "mecslice/simplex.hpp"

namespace mecslice {

OffloadLp build_offload_lp(const Scenario& s, const AllocationState& a,
                           bool cooperation) {
  OffloadLp lp;
  lp.num_users = s.num_users();
  lp.num_servers = s.num_cells();
  lp.local_cap.resize(lp.num_users);
  lp.task_cycles.resize(lp.num_users);
  for (const Server& sv : s.servers()) lp.server_budget.push_back(sv.cycle_budget);

  const std::vector<double> r = rates(s, a);
  for (std::size_t u = 0; u < lp.num_users; ++u) {
    const User& us = s.user(u);
    const auto ui = static_cast<Eigen::Index>(u);
    const double cycles = us.task.cycles();
    const double weight = s.slice_of(u).lambda;
    lp.task_cycles[u] = cycles;
    lp.local_cap[u] = us.local_budget / cycles;

    const std::size_t first = lp.columns.size();
    if (r[u] > 0.0) {
      for (std::size_t j = 0; j < lp.num_servers; ++j) {
        if (!cooperation && j != us.serving_server) continue;
        const double speed = a.f(ui, static_cast<Eigen::Index>(j));
        if (!(speed > 0.0)) continue;
        double delay = us.task.size_bits / r[u] + cycles / speed;
        if (j != us.serving_server) delay += s.handoff(us.serving_server, j);
        lp.columns.push_back({u, j + 1, delay, weight});
      }
    }
    if (lp.local_cap[u] > 0.0)
      lp.columns.push_back({u, 0, cycles / us.local_cpu, weight});
    if (lp.columns.size() == first)
      throw InfeasibleError("user[" + std::to_string(u) + "]",
                            "user " + std::to_string(u) +
                                " can neither compute locally nor reach a server");
  }
  return lp;
}

Eigen::MatrixXd solve_offload_lp(const OffloadLp& lp) {
  const auto n_cols = static_cast<Eigen::Index>(lp.columns.size());
  const auto n_users = static_cast<Eigen::Index>(lp.num_users);
  const auto n_servers = static_cast<Eigen::Index>(lp.num_servers);

  LinearProgram prog;
  prog.cost.resize(n_cols);
  prog.a_eq = Eigen::MatrixXd::Zero(n_users, n_cols);
  prog.b_eq = Eigen::VectorXd::Ones(n_users);
  // Local caps that cannot bind (>= 1) are left out.
  std::vector<Eigen::Index> cap_row(lp.num_users, -1);
  Eigen::Index n_caps = 0;
  for (std::size_t u = 0; u < lp.num_users; ++u)
    if (lp.local_cap[u] < 1.0) cap_row[u] = n_caps++;
  prog.a_le = Eigen::MatrixXd::Zero(n_servers + n_caps, n_cols);
  prog.b_le = Eigen::VectorXd::Ones(n_servers + n_caps);

  for (Eigen::Index c = 0; c < n_cols; ++c) {
    const OffloadColumn& col = lp.columns[static_cast<std::size_t>(c)];
    prog.cost(c) = col.cost();
    prog.a_eq(static_cast<Eigen::Index>(col.user), c) = 1.0;
    if (col.column == 0) {
      const Eigen::Index row = cap_row[col.user];
      if (row >= 0) {
        prog.a_le(n_servers + row, c) = 1.0;
        prog.b_le(n_servers + row) = lp.local_cap[col.user];
      }
    } else {
      const auto j = static_cast<Eigen::Index>(col.column - 1);
      // Server rows are scaled to unit budget.
      prog.a_le(j, c) = lp.task_cycles[col.user] /
                        lp.server_budget[static_cast<std::size_t>(j)];
    }
  }

  const LpResult res = solve_simplex(prog);
  if (res.status != LpStatus::kOptimal) {
    std::string row = "unknown";
    if (res.binding_le_row) {
      const auto i = static_cast<Eigen::Index>(*res.binding_le_row);
      if (i < n_servers) {
        row = "server_budget[" + std::to_string(i) + "]";
      } else {
        for (std::size_t u = 0; u < lp.num_users; ++u)
          if (cap_row[u] == i - n_servers) row = "local_budget[" + std::to_string(u) + "]";
      }
    } else if (res.unmet_eq_row) {
      row = "user[" + std::to_string(*res.unmet_eq_row) + "]";
    }
    throw InfeasibleError(row, "offloading LP infeasible; binding row " + row);
  }

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n_users, n_servers + 1);
  for (Eigen::Index c = 0; c < n_cols; ++c) {
    const OffloadColumn& col = lp.columns[static_cast<std::size_t>(c)];
    y(static_cast<Eigen::Index>(col.user), static_cast<Eigen::Index>(col.column)) =
        res.x(c);
  }
  // Remove round-off so each row is an exact simplex point.
  for (Eigen::Index u = 0; u < n_users; ++u) {
    const double sum = y.row(u).sum();
    if (sum > 0.0) y.row(u) /= sum;
  }
  return y;
}

double offload_lp_objective(const OffloadLp& lp, const Eigen::MatrixXd& y) {
  double total = 0.0;
  for (const OffloadColumn& col : lp.columns)
    total += col.cost() * y(static_cast<Eigen::Index>(col.user),
                            static_cast<Eigen::Index>(col.column));
  return total;
}

void write_lp_format(std::ostream& out, const OffloadLp& lp) {
  const auto name = [](const OffloadColumn& c) {
    return "y_" + std::to_string(c.user) + "_" + std::to_string(c.column);
  };
  const auto old_precision = out.precision(17);
  out << "\\ offloading fractions\nMinimize\n obj:";
  for (const auto& c : lp.columns) out << " + " << c.cost() << ' ' << name(c);
  out << "\nSubject To\n";
  for (std::size_t u = 0; u < lp.num_users; ++u) {
    out << " split_" << u << ':';
    for (const auto& c : lp.columns)
      if (c.user == u) out << " + " << name(c);
    out << " = 1\n";
  }
  for (std::size_t u = 0; u < lp.num_users; ++u) {
    if (lp.local_cap[u] >= 1.0) continue;
    for (const auto& c : lp.columns)
      if (c.user == u && c.column == 0)
        out << " local_" << u << ": " << name(c) << " <= " << lp.local_cap[u] << '\n';
  }
  for (std::size_t j = 0; j < lp.num_servers; ++j) {
    bool any = false;
    for (const auto& c : lp.columns) any = any || c.column == j + 1;
    if (!any) continue;
    out << " server_" << j << ':';
    for (const auto& c : lp.columns)
      if (c.column == j + 1) out << " + " << lp.task_cycles[c.user] << ' ' << name(c);
    out << " <= " << lp.server_budget[j] << '\n';
  }
  out << "End\n";
  out.precision(old_precision);
}

}  // namespace mecslice
