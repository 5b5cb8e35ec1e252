#include "mecslice/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace mecslice {

namespace {

using Index = Eigen::Index;
inline Index I(std::size_t i) { return static_cast<Index>(i); }

// Scales the entries of `values` by a common factor so that their sum is at
// most `budget`, with no round-off excess.
template <typename Getter>
void scale_into(double budget, std::size_t count, Getter&& at) {
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) sum += at(i);
  if (sum <= budget) return;
  double factor = budget / sum;
  for (;;) {
    double scaled = 0.0;
    for (std::size_t i = 0; i < count; ++i) scaled += at(i) * factor;
    if (scaled <= budget) break;
    factor *= 1.0 - 1e-15;
  }
  for (std::size_t i = 0; i < count; ++i) at(i) *= factor;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

AllocationState fair_share_init(const Scenario& s, ComputeSplit split) {
  const std::size_t nn = s.num_subchannels(), nm = s.num_cells();
  AllocationState a = AllocationState::all_local(s);
  const double total_sub = static_cast<double>(nm * nn);
  for (std::size_t k = 0; k < s.num_slices(); ++k) {
    const auto& members = s.slice_members(k);
    if (members.empty()) continue;
    const SliceSla& sl = s.slices()[k];
    const double uk = static_cast<double>(members.size());
    const double share =
        std::min(1.0, sl.bandwidth_share * total_sub / (uk * static_cast<double>(nn)));
    const double quota = sl.compute_share * s.total_server_capacity();
    for (std::size_t u : members) {
      const double pmax = s.user(u).max_power;
      for (std::size_t n = 0; n < nn; ++n) {
        a.x(I(u), I(n)) = share;
        a.p(I(u), I(n)) = std::min(pmax / static_cast<double>(nn), share * pmax);
      }
      switch (split) {
        case ComputeSplit::kServingServer:
          a.f(I(u), I(s.user(u).serving_server)) = quota / uk;
          break;
        case ComputeSplit::kAllServers:
          for (std::size_t j = 0; j < nm; ++j)
            a.f(I(u), I(j)) = quota / (uk * static_cast<double>(nm));
          break;
        case ComputeSplit::kMirrored:
          for (std::size_t j = 0; j < nm; ++j) a.f(I(u), I(j)) = quota / uk;
          break;
      }
    }
  }
  return a;
}

AllocationState round_robin_assignment(const Scenario& s, ComputeSplit split) {
  const std::size_t nn = s.num_subchannels(), nm = s.num_cells();
  AllocationState a = fair_share_init(s, split);
  a.x.setZero();
  a.p.setZero();

  std::vector<std::size_t> quota(s.num_slices());
  for (std::size_t k = 0; k < s.num_slices(); ++k)
    quota[k] = static_cast<std::size_t>(
        std::floor(s.slices()[k].bandwidth_share * static_cast<double>(nm * nn) + 1e-9));

  for (std::size_t j = 0; j < nm; ++j) {
    const auto& members = s.cell_members(j);
    if (members.empty()) continue;
    std::size_t next = 0;
    for (std::size_t n = 0; n < nn; ++n) {
      for (std::size_t tried = 0; tried < members.size(); ++tried) {
        const std::size_t u = members[(next + tried) % members.size()];
        std::size_t& left = quota[s.user(u).slice_id];
        if (left == 0) continue;
        --left;
        a.x(I(u), I(n)) = 1.0;
        next = (next + tried + 1) % members.size();
        break;
      }
    }
  }
  for (std::size_t u = 0; u < s.num_users(); ++u) {
    const double held = a.x.row(I(u)).sum();
    if (held > 0.0) a.p.row(I(u)) = a.x.row(I(u)) * (s.user(u).max_power / held);
  }
  return a;
}

AllocationState round_and_repair(const Scenario& s, const AllocationState& a,
                                 const Eigen::MatrixXd& y) {
  const std::size_t nu = s.num_users(), nn = s.num_subchannels(), nm = s.num_cells();
  AllocationState out = a;
  out.y = y;
  const auto received = [&](std::size_t u, std::size_t n) {
    return out.p(I(u), I(n)) * s.gain(u, s.user(u).serving_server, n);
  };

  for (std::size_t u = 0; u < nu; ++u)
    for (std::size_t n = 0; n < nn; ++n) {
      double& x = out.x(I(u), I(n));
      double& p = out.p(I(u), I(n));
      p = std::max(0.0, p);
      x = (x >= 0.5 || p > 0.0) ? 1.0 : 0.0;
    }

  // Reuse: one holder per (cell, subchannel).
  for (std::size_t j = 0; j < nm; ++j)
    for (std::size_t n = 0; n < nn; ++n) {
      std::size_t keep = nu;
      for (std::size_t u : s.cell_members(j)) {
        if (out.x(I(u), I(n)) == 0.0) continue;
        if (keep == nu || received(u, n) > received(keep, n) ||
            (received(u, n) == received(keep, n) && a.x(I(u), I(n)) > a.x(I(keep), I(n))))
          keep = u;
      }
      for (std::size_t u : s.cell_members(j))
        if (u != keep) {
          out.x(I(u), I(n)) = 0.0;
          out.p(I(u), I(n)) = 0.0;
        }
    }

  // Slice spectrum quota: release the weakest holdings.
  const double total_sub = static_cast<double>(nm * nn);
  for (std::size_t k = 0; k < s.num_slices(); ++k) {
    const double quota = s.slices()[k].bandwidth_share * total_sub;
    std::vector<std::pair<std::size_t, std::size_t>> held;
    for (std::size_t u : s.slice_members(k))
      for (std::size_t n = 0; n < nn; ++n)
        if (out.x(I(u), I(n)) == 1.0) held.emplace_back(u, n);
    if (static_cast<double>(held.size()) <= quota) continue;
    std::stable_sort(held.begin(), held.end(), [&](const auto& l, const auto& r) {
      return received(l.first, l.second) < received(r.first, r.second);
    });
    std::size_t excess = held.size() - static_cast<std::size_t>(std::floor(quota + 1e-9));
    for (std::size_t i = 0; i < excess; ++i) {
      out.x(I(held[i].first), I(held[i].second)) = 0.0;
      out.p(I(held[i].first), I(held[i].second)) = 0.0;
    }
  }

  for (std::size_t u = 0; u < nu; ++u)
    scale_into(s.user(u).max_power, nn,
               [&](std::size_t n) -> double& { return out.p(I(u), I(n)); });

  out.f = out.f.cwiseMax(0.0);
  for (std::size_t k = 0; k < s.num_slices(); ++k) {
    const auto& members = s.slice_members(k);
    scale_into(s.slices()[k].compute_share * s.total_server_capacity(),
               members.size() * nm, [&](std::size_t i) -> double& {
                 return out.f(I(members[i / nm]), I(i % nm));
               });
  }
  return out;
}

Solution solve_from(const Scenario& s, const AllocationState& start,
                    const SolveOptions& opts, BlockMask blocks,
                    const AllocationState* incumbent) {
  Solution best;
  best.seed = opts.seed;
  best.objective = std::numeric_limits<double>::infinity();
  bool have_best = false;
  if (incumbent) {
    best.allocation = *incumbent;
    best.objective = objective(s, *incumbent);
    have_best = std::isfinite(best.objective);
  }

  P2Options p2 = opts.p2;
  p2.blocks = blocks;
  const BlockMask polish{false, blocks.power, blocks.compute};
  P2Options polish_opts = opts.p2;
  polish_opts.blocks = polish;

  AllocationState current = start;
  AlmState multipliers = AlmState::zeros(s, p2.psi_init);
  double prev = std::numeric_limits<double>::infinity();
  for (int outer = 1; outer <= opts.outer_cap; ++outer) {
    Eigen::MatrixXd y;
    try {
      y = solve_offload_lp(build_offload_lp(s, current, opts.cooperation));
    } catch (const InfeasibleError&) {
      if (!have_best) throw;
      break;
    }
    P2Result res = solve_p2(s, y, current, p2, &multipliers);
    multipliers = res.multipliers;
    for (TraceRow& row : res.trace.rows) {
      row.outer_iter = outer;
      best.trace.rows.push_back(row);
    }

    double gap = 0.0;
    for (Index i = 0; i < res.state.x.size(); ++i) {
      const double x = res.state.x.data()[i];
      gap = std::max(gap, std::abs(x - std::round(x)));
    }

    // Certify: binary repair, power and compute re-tuned on the repaired
    // assignment, then the exact split for those resources.
    AllocationState cand = round_and_repair(s, res.state, y);
    if (polish.power || polish.compute) {
      P2Result tuned = solve_p2(s, y, cand, polish_opts, &multipliers);
      cand = round_and_repair(s, tuned.state, y);
    }
    try {
      cand.y = solve_offload_lp(build_offload_lp(s, cand, opts.cooperation));
    } catch (const InfeasibleError&) {
      // The repaired resources strand a user; fall back to the certificate.
      if (!have_best) throw;
      cand = best.allocation;
    }
    const double obj = objective(s, cand);
    if (std::isfinite(obj) && obj < best.objective) {
      best.objective = obj;
      best.allocation = cand;
      best.rounding_gap = gap;
      have_best = true;
    }
    current = std::move(cand);
    best.objective_history.push_back(best.objective);
    best.outer_iterations = outer;

    const double change = std::abs(best.objective - prev);
    if (std::isfinite(prev) &&
        change <= opts.obj_tol * std::max(std::abs(prev), 1e-12)) {
      best.converged = true;
      break;
    }
    prev = best.objective;
  }
  if (!have_best)
    throw InfeasibleError("user", "no certified allocation was found");

  best.breakdown = delays(s, best.allocation);
  best.report = constraint_report(s, best.allocation);
  return best;
}

std::vector<NamedStart> default_starts(const Scenario& s) {
  std::vector<NamedStart> out;
  out.push_back({"fair_share/serving", fair_share_init(s, ComputeSplit::kServingServer)});
  out.push_back({"round_robin/serving",
                 round_robin_assignment(s, ComputeSplit::kServingServer)});
  if (s.num_cells() > 1) {
    out.push_back({"fair_share/all", fair_share_init(s, ComputeSplit::kAllServers)});
    out.push_back({"round_robin/all", round_robin_assignment(s, ComputeSplit::kAllServers)});
    out.push_back({"fair_share/mirrored", fair_share_init(s, ComputeSplit::kMirrored)});
    out.push_back({"round_robin/mirrored", round_robin_assignment(s, ComputeSplit::kMirrored)});
  }
  return out;
}

Solution solve(const Scenario& s, const SolveOptions& opts) {
  const std::vector<NamedStart> starts = default_starts(s);
  Solution best;
  bool have = false;
  std::optional<InfeasibleError> failure;
  for (const NamedStart& st : starts) {
    Solution sol;
    try {
      sol = solve_from(s, st.state, opts);
    } catch (const InfeasibleError& e) {
      if (!failure) failure = e;
      continue;
    }
    sol.start = st.name;
    if (!have || sol.objective < best.objective) {
      best = std::move(sol);
      have = true;
    }
  }
  if (!have) throw *failure;
  // The cooperative problem contains the restricted one. Continue from the
  // restricted optimum with every server offered at the user's total speed,
  // keeping that optimum as the incumbent.
  if (opts.cooperation && s.num_cells() > 1) {
    SolveOptions restricted = opts;
    restricted.cooperation = false;
    try {
      const Solution base = solve(s, restricted);
      AllocationState open = base.allocation;
      for (Index u = 0; u < open.f.rows(); ++u)
        open.f.row(u).setConstant(open.f.row(u).sum());
      Solution cont = solve_from(s, open, opts, {}, &base.allocation);
      cont.start = "restricted/" + base.start;
      if (cont.objective < best.objective) best = std::move(cont);
    } catch (const InfeasibleError&) {
      // The restricted problem can be infeasible where this one is not.
    }
  }
  best.scheme = opts.cooperation ? "PROPOSED" : "NO_COOP";
  return best;
}

nlohmann::json solution_to_json(const Scenario& s, const Solution& sol) {
  nlohmann::json j;
  j["scheme"] = sol.scheme;
  j["seed"] = sol.seed;
  j["start"] = sol.start;
  if (!sol.frozen.empty()) j["frozen"] = sol.frozen;
  j["objective"] = sol.objective;
  j["converged"] = sol.converged;
  j["outer_iterations"] = sol.outer_iterations;
  j["objective_history"] = sol.objective_history;
  j["rounding_gap"] = sol.rounding_gap;
  j["slice_mean_deviation"] = sol.breakdown.slice_mean_deviation;

  nlohmann::json users = nlohmann::json::array();
  for (std::size_t u = 0; u < sol.breakdown.users.size(); ++u) {
    const UserDelay& d = sol.breakdown.users[u];
    users.push_back({{"user_id", u},
                     {"slice_id", s.user(u).slice_id},
                     {"comm", d.comm},
                     {"local", d.local},
                     {"handoff", d.handoff},
                     {"edge", d.edge_compute},
                     {"total", d.total},
                     {"deviation", d.deviation}});
  }
  j["users"] = std::move(users);

  const ConstraintReport& r = sol.report;
  j["constraint_report"] = {{"reuse", r.reuse},
                            {"binary", r.binary},
                            {"power", r.power},
                            {"coupling", r.coupling},
                            {"local_budget", r.local_budget},
                            {"server_budget", r.server_budget},
                            {"spectrum", r.spectrum},
                            {"compute_quota", r.compute_quota},
                            {"simplex", r.simplex}};
  j["allocation"] = {{"x", matrix_json(sol.allocation.x)},
                     {"p", matrix_json(sol.allocation.p)},
                     {"f", matrix_json(sol.allocation.f)},
                     {"y", matrix_json(sol.allocation.y)}};
  return j;
}

}  // namespace mecslice
