// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Set MECSLICE_ACCEPT to a comma list of
// criterion numbers to run a subset.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "mecslice/baselines.hpp"
#include "mecslice/fp_alm.hpp"
#include "mecslice/offload_lp.hpp"
#include "mecslice/orchestrator.hpp"
#include "oracles.hpp"

using namespace mecslice;
using Index = Eigen::Index;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Every solution produced by criteria 5 to 7, for the certificate check.
struct Certified {
  std::string label;
  double worst = 0.0;
  bool binary = true;
};
std::vector<Certified> g_solutions;

void record(const std::string& label, const Solution& sol) {
  const bool binary = ((sol.allocation.x.array() == 0.0) || (sol.allocation.x.array() == 1.0)).all();
  g_solutions.push_back({label, sol.report.max(), binary});
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// One user per cell on one subchannel; the neighbour's power sets I.
Outcome rate_transform() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_grid = 0.0, worst_closed = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double h = std::pow(10.0, -12.0 + 6.0 * unit(rng));
    const double p = 1e-3 + unit(rng);
    const double interf = unit(rng) < 0.2 ? 0.0 : std::pow(10.0, -15.0 + 6.0 * unit(rng));
    const double noise = std::pow(10.0, -15.0 + 5.0 * unit(rng));
    testutil::Builder b;
    b.cells = 2;
    b.gain = h;
    b.noise = noise;
    b.bandwidth = 1.0;
    b.add_user(0).max_power = 2.0;
    b.add_user(1).max_power = 1e300;
    const Scenario s = b.build();
    AllocationState a = AllocationState::all_local(s);
    a.x.setOnes();
    a.p(0, 0) = p;
    a.p(1, 0) = interf / h;
    const double r = subchannel_rate(s, a, 0, 0);
    FpAuxiliary aux = update_slacks(s, a, a.y);
    const double zs = aux.z(0, 0);
    worst_closed = std::max(worst_closed, std::abs(transformed_rate(s, a, aux, 0, 0) - r));
    double best = -1.0;
    for (int k = 0; k < 10000; ++k) {
      aux.z(0, 0) = 2.0 * zs * k / 9998.0;
      best = std::max(best, transformed_rate(s, a, aux, 0, 0));
    }
    worst_grid = std::max(worst_grid, std::abs(best - r));
  }
  return {worst_grid <= 1e-9 && worst_closed <= 1e-9,
          "max |grid max - r| = " + fmt("%.2e", worst_grid) +
              ", max |r(z*) - r| = " + fmt("%.2e", worst_closed) + " (100 tuples)"};
}

// Random binary state where every user holds a subchannel with power.
AllocationState binary_state(const Scenario& s, std::mt19937_64& rng) {
  AllocationState a = testutil::random_state(s, rng, true);
  const auto N = static_cast<Index>(s.num_subchannels());
  for (Index u = 0; u < a.x.rows(); ++u) {
    const Index n = u % N;
    if (a.x(u, n) == 0.0) {
      a.x(u, n) = 1.0;
      a.p(u, n) = 0.1 * s.user(std::size_t(u)).max_power / double(N);
    }
  }
  return a;
}

Outcome sum_of_ratios() {
  const Scenario s = testutil::baseline_network(1);
  std::mt19937_64 rng(77);
  double worst = 0.0;
  int finite = 0;
  for (int k = 0; k < 50; ++k) {
    const AllocationState a = binary_state(s, rng);
    const double truth = objective(s, a);
    const double trans = transformed_objective(s, a, a.y, update_slacks(s, a, a.y));
    if (std::isfinite(truth)) ++finite;
    worst = std::max(worst, std::abs(trans - truth) / std::max(1.0, std::abs(truth)));
  }
  return {worst <= 1e-8 && finite == 50,
          "max relative error " + fmt("%.2e", worst) + " over 50 states (" +
              std::to_string(finite) + " finite)"};
}

Outcome gradient_check() {
  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Scenario s = testutil::baseline_network(1 + std::uint64_t(k % 5));
    AllocationState a = testutil::random_state(s, rng);
    a.p *= 0.5 + 2.0 * unit(rng);
    a.y = solve_offload_lp(build_offload_lp(s, effective_state(a)));
    AlmState m = AlmState::zeros(s, 1.0 + 9.0 * unit(rng));
    for (auto* v : {&m.theta, &m.delta, &m.chi})
      for (Index i = 0; i < v->size(); ++i) (*v)(i) = unit(rng);
    for (auto* v : {&m.phi, &m.xi, &m.bigxi})
      for (Index i = 0; i < v->size(); ++i) v->data()[i] = unit(rng);
    const AlmProblem prob(s, a.y, update_slacks(s, a, a.y), m);
    const Eigen::VectorXd v = prob.pack(a);
    Eigen::VectorXd g;
    prob.value_and_gradient(v, g);
    Eigen::VectorXd fd(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(v(i)));
      Eigen::VectorXd lo = v, hi = v;
      lo(i) -= h;
      hi(i) += h;
      fd(i) = (prob.value(hi) - prob.value(lo)) / (2.0 * h);
    }
    worst = std::max(worst, (g - fd).lpNorm<Eigen::Infinity>() /
                                std::max(1e-12, fd.lpNorm<Eigen::Infinity>()));
  }
  return {worst <= 1e-5, "max relative error " + fmt("%.2e", worst) + " over 20 points"};
}

Outcome lp_exactness() {
  std::mt19937_64 rng(31337);
  double worst = -oracle::kInf;
  for (int k = 0; k < 25; ++k) {
    const std::size_t users = 1 + std::size_t(k % 3);
    const std::size_t servers = users == 3 ? 1 : 1 + std::size_t((k / 3) % 2);
    const OffloadLp lp = oracle::random_tiny_lp(rng, users, servers);
    const double value = offload_lp_objective(lp, solve_offload_lp(lp));
    worst = std::max(worst, value - oracle::grid_lp_minimum(lp, 1e-3));
  }
  return {worst <= 1e-4, "max (LP - grid) = " + fmt("%.2e", worst) + " over 25 instances"};
}

Outcome joint_gap() {
  const Scenario s = testutil::tiny_oracle(1);
  const double bf = oracle::joint_brute_force(s);
  const Solution sol = run_scheme(s, SchemeId::kProposed);
  record("joint oracle", sol);
  const double excess = (sol.objective - bf) / std::abs(bf);
  return {std::isfinite(bf) && sol.objective <= bf + 0.05 * std::abs(bf),
          "algorithm " + fmt("%.6g", sol.objective) + ", exhaustive " + fmt("%.6g", bf) +
              ", excess " + fmt("%.2f", 100.0 * excess) + "%"};
}

Outcome convergence() {
  int ok = 0;
  std::ostringstream why;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Solution sol = run_scheme(testutil::baseline_network(seed), SchemeId::kProposed);
    record("convergence seed " + std::to_string(seed), sol);
    bool monotone = true;
    for (std::size_t k = 1; k < sol.objective_history.size(); ++k)
      monotone = monotone && sol.objective_history[k] <= sol.objective_history[k - 1] + 1e-6;
    const bool converged = sol.converged && sol.outer_iterations <= 20;
    if (monotone && converged)
      ++ok;
    else
      why << " seed " << seed << (monotone ? "" : " increases") << (converged ? "" : " unconverged");
  }
  return {ok == 10, std::to_string(ok) + "/10 seeds monotone and converged within 20" + why.str()};
}

Outcome dominance() {
  const std::vector<std::size_t> loads = {4, 6, 8, 10};
  std::map<std::size_t, std::map<SchemeId, double>> mean;
  for (std::size_t n : loads) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Scenario s = testutil::baseline_network(seed, n);
      for (SchemeId id : all_schemes()) {
        const Solution sol = run_scheme(s, id);
        record(std::string(scheme_name(id)) + " n=" + std::to_string(n) + " seed " +
                   std::to_string(seed),
               sol);
        mean[n][id] += sol.objective / 10.0;
      }
    }
    std::fprintf(stderr, "  n=%zu: PROPOSED %.6g NO_COOP %.6g JOCRA %.6g JSPRA %.6g\n", n,
                 mean[n][SchemeId::kProposed], mean[n][SchemeId::kNoCoop],
                 mean[n][SchemeId::kJocra], mean[n][SchemeId::kJspra]);
  }
  bool pass = true;
  std::ostringstream os;
  for (SchemeId id : {SchemeId::kNoCoop, SchemeId::kJocra, SchemeId::kJspra}) {
    bool dominated = true;
    for (std::size_t n : loads)
      dominated = dominated && mean[n][SchemeId::kProposed] <= mean[n][id] + 1e-9;
    const double gap10 = mean[10][id] - mean[10][SchemeId::kProposed];
    pass = pass && dominated && gap10 > 0.0;
    os << scheme_name(id) << (dominated ? " dominated" : " NOT dominated") << ", gap@10 "
       << fmt("%.4g", gap10) << "; ";
  }
  os << "cooperation gap by load:";
  bool increasing = true;
  double prev = -oracle::kInf;
  for (std::size_t n : loads) {
    const double gap = mean[n][SchemeId::kNoCoop] - mean[n][SchemeId::kProposed];
    const double scale = std::max(1.0, std::abs(mean[n][SchemeId::kProposed]));
    increasing = increasing && gap >= prev - 1e-9 * scale;
    prev = gap;
    os << " " << n << ":" << fmt("%.4g", gap);
  }
  if (!increasing) os << " (not increasing)";
  return {pass && increasing, os.str()};
}

Outcome certificates() {
  int bad = 0;
  double worst = 0.0;
  std::string first;
  for (const Certified& c : g_solutions) {
    worst = std::max(worst, c.worst);
    if (c.worst > 1e-6 || !c.binary) {
      if (bad++ == 0) first = " first failure: " + c.label;
    }
  }
  return {bad == 0 && !g_solutions.empty(),
          std::to_string(g_solutions.size() - std::size_t(bad)) + "/" +
              std::to_string(g_solutions.size()) + " solutions certified, worst residual " +
              fmt("%.2e", worst) + first};
}

// Wall time of one multiplier round (inner minimization plus update) of
// the resource subproblem, averaged over a full subproblem solve.
double seconds_per_alm_round(std::size_t slices, std::size_t users, std::size_t cells) {
  GeneratorSpec g;
  g.num_slices = slices;
  g.num_cells = cells;
  g.users_per_cell = users / cells;
  double best = oracle::kInf;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Scenario s = generate_scenario(g, seed);
    const AllocationState start = fair_share_init(s);
    const Eigen::MatrixXd y = solve_offload_lp(build_offload_lp(s, effective_state(start)));
    const auto t0 = std::chrono::steady_clock::now();
    const P2Result r = solve_p2(s, y, start);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    int rounds = 0;
    for (const TraceRow& row : r.trace.rows) rounds += row.alm_rounds;
    best = std::min(best, dt / std::max(1, rounds));
  }
  return best;
}

Outcome scaling() {
  const std::vector<std::array<std::size_t, 3>> sizes = {{1, 4, 1}, {2, 8, 2}, {3, 12, 3}};
  std::vector<double> lx, ly;
  std::ostringstream os;
  for (const auto& [k, u, m] : sizes) {
    const double t = seconds_per_alm_round(k, u, m);
    const double kum = double(k * u * m);
    lx.push_back(std::log(kum));
    ly.push_back(std::log(t));
    os << "KUM=" << k * u * m << ": " << fmt("%.3g", t * 1e3) << " ms; ";
  }
  const double n = double(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  os << "fitted exponent " << fmt("%.3f", slope);
  return {slope <= 2.3, os.str()};
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* env = std::getenv("MECSLICE_ACCEPT")) {
    std::stringstream ss(env);
    std::string item;
    while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
  }
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "rate transform equality", rate_transform},
      {2, "sum-of-ratios tightness", sum_of_ratios},
      {3, "augmented Lagrangian gradient", gradient_check},
      {4, "offloading LP exactness", lp_exactness},
      {5, "joint brute-force gap", joint_gap},
      {6, "outer convergence", convergence},
      {7, "scheme dominance", dominance},
      {8, "feasibility certificate", certificates},
      {9, "per-iteration scaling", scaling},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.pass) ++failed;
    std::printf("[%s] criterion %d: %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), dt);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
