#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mecslice/perf_model.hpp"
#include "mecslice/scenario.hpp"

namespace testutil {

using mecslice::AllocationState;
using mecslice::Scenario;

/// Hand-built network: every gain equals `gain`, unit noise, 1 Hz
/// subchannels unless changed afterwards through the builder fields.
struct Builder {
  std::size_t cells = 1;
  std::size_t subchannels = 1;
  std::vector<mecslice::SliceSla> slices = {{0, 1.0, 1.0, 1.0, 1.0}};
  std::vector<mecslice::User> users;
  double gain = 1.0;
  double noise = 1.0;
  double bandwidth = 1.0;
  double capacity = 1.0;
  double cycle_budget = 1e300;
  double handoff = 0.0;

  mecslice::User& add_user(std::size_t cell, std::size_t slice = 0, double bits = 1.0,
                           double cycles_per_bit = 1.0) {
    mecslice::User u;
    u.slice_id = slice;
    u.serving_server = cell;
    u.task = {bits, cycles_per_bit};
    u.local_cpu = 1.0;
    u.local_budget = 1e300;
    u.max_power = 1.0;
    users.push_back(u);
    return users.back();
  }

  Scenario build() const {
    mecslice::ChannelState ch;
    ch.gains = mecslice::GainTensor(users.size(), cells, subchannels);
    for (std::size_t u = 0; u < users.size(); ++u)
      for (std::size_t j = 0; j < cells; ++j)
        for (std::size_t n = 0; n < subchannels; ++n) ch.gains(u, j, n) = gain;
    ch.noise_power = noise;
    ch.subchannel_bandwidth = bandwidth;
    ch.num_subchannels = subchannels;
    std::vector<mecslice::Server> servers(cells);
    for (auto& sv : servers) {
      sv.capacity = capacity;
      sv.cycle_budget = cycle_budget;
    }
    Eigen::MatrixXd h = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(cells),
                                                  static_cast<Eigen::Index>(cells), handoff);
    h.diagonal().setZero();
    return Scenario(users, servers, slices, ch, h, 0);
  }
};

/// The 2-cell, 6-users-per-cell, 16-subchannel, 3-slice default network.
inline Scenario baseline_network(std::uint64_t seed, std::size_t users_per_cell = 6) {
  mecslice::GeneratorSpec g;
  g.users_per_cell = users_per_cell;
  return mecslice::generate_scenario(g, seed);
}

/// The 1-cell, 2-user, 2-subchannel, 1-slice oracle instance.
inline Scenario tiny_oracle(std::uint64_t seed = 1) {
  mecslice::GeneratorSpec g;
  g.num_cells = 1;
  g.users_per_cell = 2;
  g.num_subchannels = 2;
  g.num_slices = 1;
  return mecslice::generate_scenario(g, seed);
}

/// Random state inside the boxes: x in [0,1] (or {0,1}), p <= x P_max with
/// sum_n p <= P_max, f in (0, total speed / U], y on the simplex.
inline AllocationState random_state(const Scenario& s, std::mt19937_64& rng,
                                    bool binary_x = false) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AllocationState a = AllocationState::all_local(s);
  const auto n_sub = static_cast<Eigen::Index>(s.num_subchannels());
  for (Eigen::Index u = 0; u < a.x.rows(); ++u) {
    const double pmax = s.user(static_cast<std::size_t>(u)).max_power;
    for (Eigen::Index n = 0; n < n_sub; ++n) {
      a.x(u, n) = binary_x ? (unit(rng) < 0.5 ? 1.0 : 0.0) : unit(rng);
      a.p(u, n) = a.x(u, n) * pmax * unit(rng) / static_cast<double>(n_sub);
    }
    for (Eigen::Index j = 0; j < a.f.cols(); ++j)
      a.f(u, j) = (0.05 + unit(rng)) * s.total_server_capacity() /
                  static_cast<double>(s.num_users());
    double sum = 0.0;
    for (Eigen::Index j = 0; j < a.y.cols(); ++j) sum += (a.y(u, j) = unit(rng));
    a.y.row(u) /= sum;
  }
  return a;
}

}  // namespace testutil
