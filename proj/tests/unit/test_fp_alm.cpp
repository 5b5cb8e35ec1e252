#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "mecslice/fp_alm.hpp"
#include "mecslice/offload_lp.hpp"
#include "mecslice/orchestrator.hpp"

using namespace mecslice;
using testutil::Builder;

namespace {

Eigen::Index I(std::size_t i) { return static_cast<Eigen::Index>(i); }

// One user alone on one cell, with the given subchannel count, fully
// offloading to its server.
Scenario lone_user(std::size_t subchannels = 1) {
  Builder b;
  b.subchannels = subchannels;
  b.bandwidth = 1e6;
  b.gain = 1e-3;
  b.noise = 1e-3;
  b.capacity = 1e9;
  b.add_user(0, 0, 1e6, 100.0).local_cpu = 1e8;
  return b.build();
}

AllocationState offloading(const Scenario& s) {
  AllocationState a = AllocationState::all_local(s);
  a.y.setZero();
  for (Eigen::Index u = 0; u < a.y.rows(); ++u)
    a.y(u, 1 + I(s.user(std::size_t(u)).serving_server)) = 1.0;
  return a;
}

AlmState random_multipliers(const Scenario& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AlmState m = AlmState::zeros(s, 0.5 + 4.0 * unit(rng));
  const auto fill = [&](auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = 2.0 * unit(rng);
  };
  fill(m.theta);
  fill(m.delta);
  fill(m.phi);
  fill(m.xi);
  fill(m.bigxi);
  fill(m.chi);
  return m;
}

double shannon(double h, double p, double interf, double noise) {
  return std::log2(1.0 + h * p / (interf + noise));
}

double rhat(double z, double h, double p, double interf, double noise) {
  return std::log2(1.0 + std::max(0.0, 2.0 * z * std::sqrt(h * p) - z * z * (interf + noise)));
}

double pen(double mult, double res, double psi) {
  const double shifted = std::max(0.0, mult + psi * res);
  return (shifted * shifted - mult * mult) / (2.0 * psi);
}

}  // namespace

TEST_CASE("transformed rate is zero at zero slack") {
  const Scenario s = lone_user();
  AllocationState a = offloading(s);
  a.x(0, 0) = 1.0;
  a.p(0, 0) = 0.5;
  FpAuxiliary aux = update_slacks(s, a, a.y);
  aux.z.setZero();
  CHECK(transformed_rate(s, a, aux, 0, 0) == 0.0);
}

TEST_CASE("closed-form slack recovers the Shannon term and maximizes the transform") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const double h = std::pow(10.0, -3.0 - 6.0 * unit(rng));
    const double p = 0.01 + unit(rng);
    const double interf = std::pow(10.0, -14.0 + 4.0 * unit(rng));
    const double noise = std::pow(10.0, -14.0 + 3.0 * unit(rng));
    const double zs = std::sqrt(h * p) / (interf + noise);
    const double r = shannon(h, p, interf, noise);
    CHECK(rhat(zs, h, p, interf, noise) == doctest::Approx(r).epsilon(1e-9));
    // Concave on [0, 2 z*] with the peak at z*.
    double prev_diff = std::numeric_limits<double>::infinity();
    double prev = rhat(0.0, h, p, interf, noise);
    for (int k = 1; k <= 200; ++k) {
      const double v = rhat(zs * k / 100.0, h, p, interf, noise);
      CHECK(v <= r + 1e-12 * std::max(1.0, r));
      const double diff = v - prev;
      CHECK(diff <= prev_diff + 1e-12);
      prev_diff = diff;
      prev = v;
    }
  }
}

TEST_CASE("update_slacks: zero power gives zero slack, lone user gets sqrt(hp)/noise") {
  const Scenario s = lone_user(2);
  AllocationState a = offloading(s);
  a.x.setOnes();
  a.p(0, 1) = 0.3;
  const FpAuxiliary aux = update_slacks(s, a, a.y);
  CHECK(aux.z(0, 0) == 0.0);
  CHECK(aux.z(0, 1) == doctest::Approx(std::sqrt(s.gain(0, 0, 1) * 0.3) / 1e-3));
  CHECK(transformed_rate(s, a, aux, 0, 1) == doctest::Approx(subchannel_rate(s, a, 0, 1)));
  CHECK(transformed_rate(s, a, aux, 0, 0) == 0.0);
}

TEST_CASE("all-local split: transformed objective is the local objective") {
  const Scenario s = testutil::baseline_network(2);
  std::mt19937_64 rng(1);
  AllocationState a = testutil::random_state(s, rng);
  a.y = AllocationState::all_local(s).y;
  const FpAuxiliary aux = update_slacks(s, a, a.y);
  CHECK(transformed_objective(s, a, a.y, aux) == doctest::Approx(objective(s, a)));
}

TEST_CASE("sum-of-ratios bound: tight at the update, above it elsewhere") {
  const Scenario s = testutil::baseline_network(4);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    AllocationState a = testutil::random_state(s, rng, true);
    const FpAuxiliary aux = update_slacks(s, a, a.y);
    const double truth = relaxed_objective(s, a, a.y);
    if (!std::isfinite(truth)) continue;
    CHECK(transformed_objective(s, a, a.y, aux) == doctest::Approx(truth).epsilon(1e-9));
    FpAuxiliary off = aux;
    for (Eigen::Index u = 0; u < off.t.size(); ++u) off.t(u) *= 0.2 + 3.0 * unit(rng);
    CHECK(transformed_objective(s, a, a.y, off) >= truth - 1e-9 * std::abs(truth));
  }
}

TEST_CASE("augmented Lagrangian with zero multipliers at a feasible state is the objective") {
  const Scenario s = lone_user(2);
  AllocationState a = offloading(s);
  a.x.setOnes();
  a.p.setConstant(0.4);
  a.f(0, 0) = 0.5e9;
  const FpAuxiliary aux = update_slacks(s, a, a.y);
  const AlmState zero = AlmState::zeros(s);
  CHECK(augmented_lagrangian(s, a, a.y, aux, zero) ==
        doctest::Approx(transformed_objective(s, a, a.y, aux)));
}

TEST_CASE("single power violation adds v^2/2 at unit penalty") {
  const Scenario s = lone_user(2);
  AllocationState a = offloading(s);
  const double v = 0.3;
  a.x.setOnes();
  a.p.setConstant((1.0 + v) / 2.0);  // P_max = 1 W
  a.f(0, 0) = 0.5e9;
  const FpAuxiliary aux = update_slacks(s, a, a.y);
  const AlmState zero = AlmState::zeros(s, 1.0);
  CHECK(augmented_lagrangian(s, a, a.y, aux, zero) - transformed_objective(s, a, a.y, aux) ==
        doctest::Approx(v * v / 2.0));
}

TEST_CASE("augmented Lagrangian matches a term-by-term sum") {
  const Scenario s = testutil::baseline_network(5);
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    AllocationState a = testutil::random_state(s, rng);
    a.p *= 2.5;
    const FpAuxiliary aux = update_slacks(s, a, a.y);
    const AlmState m = random_multipliers(s, rng);
    double expect = transformed_objective(s, a, a.y, aux);
    const double psi = m.psi;
    const double total_sub = double(s.num_cells() * s.num_subchannels());
    for (std::size_t u = 0; u < s.num_users(); ++u) {
      const double pmax = s.user(u).max_power;
      expect += pen(m.theta(I(u)), a.p.row(I(u)).sum() / pmax - 1.0, psi);
      for (std::size_t n = 0; n < s.num_subchannels(); ++n) {
        const double x = a.x(I(u), I(n));
        expect += pen(m.xi(I(u), I(n)), x - x * x, psi);
        expect += pen(m.bigxi(I(u), I(n)), a.p(I(u), I(n)) / pmax - x, psi);
      }
    }
    for (std::size_t j = 0; j < s.num_cells(); ++j)
      for (std::size_t n = 0; n < s.num_subchannels(); ++n) {
        double held = 0.0;
        for (std::size_t u = 0; u < s.num_users(); ++u)
          if (s.user(u).serving_server == j) held += a.x(I(u), I(n));
        expect += pen(m.phi(I(n), I(j)), held - 1.0, psi);
      }
    for (std::size_t k = 0; k < s.num_slices(); ++k) {
      double held = 0.0, speed = 0.0;
      for (std::size_t u = 0; u < s.num_users(); ++u)
        if (s.user(u).slice_id == k) {
          held += a.x.row(I(u)).sum();
          speed += a.f.row(I(u)).sum();
        }
      expect += pen(m.chi(I(k)), held - s.slices()[k].bandwidth_share * total_sub, psi);
      expect += pen(m.delta(I(k)),
                    speed / s.total_server_capacity() - s.slices()[k].compute_share, psi);
    }
    CHECK(augmented_lagrangian(s, a, a.y, aux, m) == doctest::Approx(expect).epsilon(1e-12));
    // The packed form evaluates the same function.
    const AlmProblem prob(s, a.y, aux, m);
    CHECK(prob.value(prob.pack(a)) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("multiplier updates") {
  const Scenario s = lone_user(2);
  AlmState m = AlmState::zeros(s, 10.0);
  AllocationState a = offloading(s);
  a.x.setOnes();
  a.p.setConstant(0.25);
  AlmResiduals r = alm_residuals(s, a);
  r.power(0) = 0.0;
  CHECK(update_multipliers(m, r).theta(0) == 0.0);
  CHECK(update_multipliers(m, r).psi == 10.0);

  r.power(0) = 0.02;
  CHECK(update_multipliers(m, r).theta(0) == doctest::Approx(0.2));

  m.theta(0) = 0.1;
  r.power(0) = -0.5;
  CHECK(update_multipliers(m, r).theta(0) == 0.0);
}

TEST_CASE("analytic gradient matches central differences") {
  const Scenario s = testutil::baseline_network(6);
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 5; ++rep) {
    AllocationState a = testutil::random_state(s, rng);
    a.y = solve_offload_lp(build_offload_lp(s, effective_state(a)));
    const FpAuxiliary aux = update_slacks(s, a, a.y);
    const AlmProblem prob(s, a.y, aux, random_multipliers(s, rng));
    const Eigen::VectorXd v = prob.pack(a);
    Eigen::VectorXd g;
    prob.value_and_gradient(v, g);
    Eigen::VectorXd fd(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double h = 1e-6;
      Eigen::VectorXd lo = v, hi = v;
      lo(i) -= h;
      hi(i) += h;
      fd(i) = (prob.value(hi) - prob.value(lo)) / (2.0 * h);
    }
    CHECK((g - fd).lpNorm<Eigen::Infinity>() / g.lpNorm<Eigen::Infinity>() <= 1e-5);
  }
}

TEST_CASE("inner_minimize leaves a stationary point alone") {
  // All local: the objective is constant in every variable and no row is
  // active, so the projected gradient vanishes.
  const Scenario s = lone_user(2);
  AllocationState a = AllocationState::all_local(s);
  a.x(0, 0) = 1.0;
  a.p(0, 0) = 0.5;
  a.f(0, 0) = 0.5e9;
  const FpAuxiliary aux = update_slacks(s, a, a.y);
  const InnerResult r = inner_minimize(s, a.y, aux, AlmState::zeros(s), a);
  CHECK(r.iterations <= 1);
  CHECK((r.state.p - a.p).norm() <= 1e-12);
  CHECK((r.state.x - a.x).norm() <= 1e-12);
}

TEST_CASE("inner_minimize matches a one-dimensional grid in p") {
  const Scenario s = lone_user(1);
  AllocationState a = offloading(s);
  a.x(0, 0) = 1.0;
  a.p(0, 0) = 0.5;
  a.f(0, 0) = 0.5e9;
  const FpAuxiliary aux = update_slacks(s, a, a.y);
  const BlockMask power_only{false, true, false};
  AlmState m = AlmState::zeros(s, 1.0);
  const auto al = [&](double p) {
    AllocationState b = a;
    b.p(0, 0) = p;
    return augmented_lagrangian(s, b, a.y, aux, m, power_only);
  };
  // Price power so that the stationary point sits at p = 0.5: the penalty
  // slope there is theta - 0.5 and must cancel the objective slope.
  const double slope = (al(0.5 + 1e-6) - al(0.5 - 1e-6)) / 2e-6;
  REQUIRE(slope < 0.0);
  m.theta(0) = 0.5 - slope;

  double best_p = 0.0, best = al(0.0);
  for (int k = 1; k <= 100000; ++k) {
    const double p = k * 1e-5;
    const double v = al(p);
    if (v < best) {
      best = v;
      best_p = p;
    }
  }
  CHECK(best_p == doctest::Approx(0.5).epsilon(1e-3));
  AllocationState start = a;
  start.p(0, 0) = 0.3;
  InnerOptions opts;
  opts.tol = 1e-10;
  opts.max_iters = 2000;
  const InnerResult r = inner_minimize(s, a.y, aux, m, start, opts, power_only);
  CHECK(r.state.p(0, 0) == doctest::Approx(best_p).epsilon(1e-3));
  CHECK(r.value <= best + 1e-9 * std::abs(best));
}

TEST_CASE("solve_p2 hands an uncontested user everything") {
  const Scenario s = lone_user(1);
  AllocationState a = offloading(s);
  a.x(0, 0) = 0.5;
  a.p(0, 0) = 0.2;
  a.f(0, 0) = 0.2e9;
  const P2Result r = solve_p2(s, a.y, a);
  CHECK(r.state.x(0, 0) >= 0.99);
  CHECK(r.state.p(0, 0) >= 0.99 * s.user(0).max_power);
  CHECK(r.state.f(0, 0) >= 0.99 * s.total_server_capacity());
  for (double v : {r.multipliers.theta.minCoeff(), r.multipliers.delta.minCoeff(),
                   r.multipliers.phi.minCoeff(), r.multipliers.xi.minCoeff(),
                   r.multipliers.bigxi.minCoeff(), r.multipliers.chi.minCoeff()})
    CHECK(v >= 0.0);
}

TEST_CASE("solve_p2 on the baseline network: nonnegative multipliers, Psi schedule") {
  const Scenario s = testutil::baseline_network(1);
  const AllocationState start = fair_share_init(s);
  Eigen::MatrixXd y = solve_offload_lp(build_offload_lp(s, effective_state(start)));
  const P2Result r = solve_p2(s, y, start);
  REQUIRE(!r.trace.rows.empty());
  CHECK(r.multipliers.theta.minCoeff() >= 0.0);
  CHECK(r.multipliers.xi.minCoeff() >= 0.0);
  CHECK(r.multipliers.phi.minCoeff() >= 0.0);
  CHECK(r.multipliers.psi >= 1.0);
  for (std::size_t k = 1; k < r.trace.rows.size(); ++k)
    CHECK(r.trace.rows[k].psi >= r.trace.rows[k - 1].psi);
  CHECK(std::isfinite(relaxed_objective(s, r.state, y)));
}

TEST_CASE("trace CSV header and rows") {
  RunTrace t;
  t.rows.push_back({});
  std::ostringstream os;
  write_trace_csv(os, t);
  CHECK(os.str().rfind(
            "outer_iter,fp_iter,alm_rounds,inner_iters,transformed_obj,true_obj,"
            "viol_power,viol_compute,viol_reuse,viol_binary,viol_coupling,"
            "viol_spectrum,psi\n",
            0) == 0);
}
