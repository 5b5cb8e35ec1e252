#include "mecslice/perf_model.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace mecslice {

AllocationState AllocationState::all_local(const Scenario& s) {
  const auto u = static_cast<Eigen::Index>(s.num_users());
  const auto n = static_cast<Eigen::Index>(s.num_subchannels());
  const auto m = static_cast<Eigen::Index>(s.num_cells());
  AllocationState a;
  a.x = Eigen::MatrixXd::Zero(u, n);
  a.p = Eigen::MatrixXd::Zero(u, n);
  a.f = Eigen::MatrixXd::Zero(u, m);
  a.y = Eigen::MatrixXd::Zero(u, m + 1);
  a.y.col(0).setOnes();
  return a;
}

double interference(const Scenario& s, const AllocationState& a, std::size_t u,
                    std::size_t n) {
  const std::size_t home = s.user(u).serving_server;
  const auto ni = static_cast<Eigen::Index>(n);
  double total = 0.0;
  for (std::size_t j = 0; j < s.num_cells(); ++j) {
    if (j == home) continue;
    for (std::size_t v : s.cell_members(j)) {
      const auto vi = static_cast<Eigen::Index>(v);
      total += a.x(vi, ni) * a.p(vi, ni) * s.gain(v, home, n);
    }
  }
  return total;
}

double subchannel_rate(const Scenario& s, const AllocationState& a,
                       std::size_t u, std::size_t n) {
  const auto ui = static_cast<Eigen::Index>(u);
  const auto ni = static_cast<Eigen::Index>(n);
  const double signal =
      a.x(ui, ni) * a.p(ui, ni) * s.gain(u, s.user(u).serving_server, n);
  if (signal <= 0.0) return 0.0;
  const double sinr =
      signal / (s.channel().noise_power + interference(s, a, u, n));
  return s.channel().subchannel_bandwidth * std::log2(1.0 + sinr);
}

double rate(const Scenario& s, const AllocationState& a, std::size_t u) {
  double r = 0.0;
  for (std::size_t n = 0; n < s.num_subchannels(); ++n)
    r += subchannel_rate(s, a, u, n);
  return r;
}

std::vector<double> rates(const Scenario& s, const AllocationState& a) {
  std::vector<double> out(s.num_users());
  for (std::size_t u = 0; u < s.num_users(); ++u) out[u] = rate(s, a, u);
  return out;
}

DelayBreakdown delays(const Scenario& s, const AllocationState& a) {
  DelayBreakdown out;
  out.users.resize(s.num_users());
  const std::vector<double> r = rates(s, a);
  for (std::size_t u = 0; u < s.num_users(); ++u) {
    const auto ui = static_cast<Eigen::Index>(u);
    const User& us = s.user(u);
    const double cycles = us.task.cycles();
    UserDelay& d = out.users[u];

    double offloaded = 0.0;
    bool infeasible = false;
    for (std::size_t j = 0; j < s.num_cells(); ++j) {
      const double share = a.y(ui, static_cast<Eigen::Index>(j + 1));
      if (share <= 0.0) continue;
      offloaded += share;
      if (j != us.serving_server) d.handoff += share * s.handoff(us.serving_server, j);
      const double speed = a.f(ui, static_cast<Eigen::Index>(j));
      if (speed <= 0.0)
        infeasible = true;
      else
        d.edge_compute += share * cycles / speed;
    }
    if (offloaded > 0.0) {
      if (r[u] <= 0.0)
        infeasible = true;
      else
        d.comm = offloaded * us.task.size_bits / r[u];
    }
    d.local = a.y(ui, 0) * cycles / us.local_cpu;
    d.total = infeasible ? kInfiniteDelay
                         : d.local + d.comm + d.handoff + d.edge_compute;
    d.deviation = d.total - s.slice_of(u).delay_target;
    if (infeasible) out.finite = false;
  }

  out.slice_mean_deviation.assign(s.num_slices(), 0.0);
  for (std::size_t k = 0; k < s.num_slices(); ++k) {
    const auto& members = s.slice_members(k);
    if (members.empty()) continue;
    double sum = 0.0;
    for (std::size_t u : members) sum += out.users[u].deviation;
    out.slice_mean_deviation[k] = sum / static_cast<double>(members.size());
  }
  return out;
}

double objective(const Scenario& s, const DelayBreakdown& breakdown) {
  if (!breakdown.finite) return kInfiniteDelay;
  double total = 0.0;
  for (std::size_t u = 0; u < s.num_users(); ++u)
    total += s.slice_of(u).lambda * breakdown.users[u].deviation;
  return total;
}

double objective(const Scenario& s, const AllocationState& a) {
  return objective(s, delays(s, a));
}

double ConstraintReport::max() const {
  return std::max({reuse, binary, power, coupling, local_budget, server_budget,
                   spectrum, compute_quota, simplex});
}

ConstraintReport constraint_report(const Scenario& s, const AllocationState& a) {
  ConstraintReport rep;
  const std::size_t n_users = s.num_users();
  const std::size_t n_sub = s.num_subchannels();
  const std::size_t m = s.num_cells();
  const auto idx = [](std::size_t i) { return static_cast<Eigen::Index>(i); };

  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t n = 0; n < n_sub; ++n) {
      double load = 0.0;
      for (std::size_t u : s.cell_members(j)) load += a.x(idx(u), idx(n));
      rep.reuse = std::max(rep.reuse, load - 1.0);
    }

  for (std::size_t u = 0; u < n_users; ++u) {
    const User& us = s.user(u);
    double psum = 0.0;
    for (std::size_t n = 0; n < n_sub; ++n) {
      const double x = a.x(idx(u), idx(n));
      const double p = a.p(idx(u), idx(n));
      const double out_of_box = std::max(-x, x - 1.0);
      rep.binary = std::max({rep.binary, std::min(std::abs(x), std::abs(1.0 - x)),
                             out_of_box});
      rep.power = std::max(rep.power, -p / us.max_power);
      rep.coupling = std::max(rep.coupling, (p - x * us.max_power) / us.max_power);
      psum += p;
    }
    rep.power = std::max(rep.power, (psum - us.max_power) / us.max_power);

    const double cycles = us.task.cycles();
    rep.local_budget = std::max(
        rep.local_budget, (a.y(idx(u), 0) * cycles - us.local_budget) / cycles);

    double ysum = 0.0;
    for (std::size_t j = 0; j <= m; ++j) {
      const double v = a.y(idx(u), idx(j));
      ysum += v;
      rep.simplex = std::max({rep.simplex, -v, v - 1.0});
    }
    rep.simplex = std::max(rep.simplex, std::abs(ysum - 1.0));
  }

  for (std::size_t j = 0; j < m; ++j) {
    double work = 0.0;
    for (std::size_t u = 0; u < n_users; ++u)
      work += a.y(idx(u), idx(j + 1)) * s.user(u).task.cycles();
    const double budget = s.servers()[j].cycle_budget;
    rep.server_budget = std::max(rep.server_budget, (work - budget) / budget);
  }

  const double total_sub = static_cast<double>(m * n_sub);
  const double total_speed = s.total_server_capacity();
  for (std::size_t k = 0; k < s.num_slices(); ++k) {
    const SliceSla& sl = s.slices()[k];
    double held = 0.0, speed = 0.0;
    for (std::size_t u : s.slice_members(k)) {
      for (std::size_t n = 0; n < n_sub; ++n) held += a.x(idx(u), idx(n));
      for (std::size_t j = 0; j < m; ++j) {
        const double f = a.f(idx(u), idx(j));
        speed += f;
        rep.compute_quota = std::max(rep.compute_quota, -f / total_speed);
      }
    }
    rep.spectrum = std::max(rep.spectrum, held - sl.bandwidth_share * total_sub);
    rep.compute_quota = std::max(
        rep.compute_quota, (speed - sl.compute_share * total_speed) / total_speed);
  }
  return rep;
}

void write_breakdown_csv(std::ostream& out, const Scenario& s,
                         const DelayBreakdown& breakdown) {
  out << "user_id,slice_id,comm,local,handoff,edge,total,deviation\n";
  const auto old_precision = out.precision(17);
  for (std::size_t u = 0; u < breakdown.users.size(); ++u) {
    const UserDelay& d = breakdown.users[u];
    out << u << ',' << s.user(u).slice_id << ',' << d.comm << ',' << d.local
        << ',' << d.handoff << ',' << d.edge_compute << ',' << d.total << ','
        << d.deviation << '\n';
  }
  out.precision(old_precision);
}

}  // namespace mecslice
