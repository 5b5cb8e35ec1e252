#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace mecslice {

/// Raised when a scenario document cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a scenario violates a model invariant. `field()` names the
/// offending key (dotted path).
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct SliceSla {
  std::size_t slice_id = 0;
  double lambda = 1.0;           // priority weight
  double delay_target = 1.0;     // seconds
  double bandwidth_share = 1.0;  // alpha, fraction of the M*N subchannels
  double compute_share = 1.0;    // beta, fraction of the total server speed
};

struct Task {
  double size_bits = 0.0;
  double cycles_per_bit = 0.0;

  double cycles() const { return size_bits * cycles_per_bit; }
};

struct User {
  std::size_t user_id = 0;
  std::size_t slice_id = 0;
  std::size_t serving_server = 0;
  Task task;
  double local_cpu = 0.0;     // cycles/s
  double local_budget = 0.0;  // cycles available for the local share of a task
  double max_power = 0.0;     // watts
};

struct Server {
  std::size_t server_id = 0;
  double capacity = 0.0;      // cycles/s
  double cycle_budget = 0.0;  // cycles per decision epoch (offloaded work cap)
};

/// Dense (user, cell, subchannel) tensor of path gains.
class GainTensor {
 public:
  GainTensor() = default;
  GainTensor(std::size_t users, std::size_t cells, std::size_t subchannels)
      : users_(users), cells_(cells), subchannels_(subchannels),
        data_(users * cells * subchannels, 0.0) {}

  double& operator()(std::size_t u, std::size_t j, std::size_t n) {
    return data_[(u * cells_ + j) * subchannels_ + n];
  }
  double operator()(std::size_t u, std::size_t j, std::size_t n) const {
    return data_[(u * cells_ + j) * subchannels_ + n];
  }

  std::size_t users() const { return users_; }
  std::size_t cells() const { return cells_; }
  std::size_t subchannels() const { return subchannels_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const GainTensor&) const = default;

 private:
  std::size_t users_ = 0, cells_ = 0, subchannels_ = 0;
  std::vector<double> data_;
};

struct ChannelState {
  GainTensor gains;
  double noise_power = 0.0;           // watts per subchannel
  double subchannel_bandwidth = 0.0;  // Hz
  std::size_t num_subchannels = 0;
};

/// Immutable network instance. The constructor validates every invariant and
/// throws ValidationError naming the offending field.
class Scenario {
 public:
  Scenario(std::vector<User> users, std::vector<Server> servers,
           std::vector<SliceSla> slices, ChannelState channel,
           Eigen::MatrixXd handoff, std::uint64_t rng_seed);

  std::size_t num_users() const { return users_.size(); }
  std::size_t num_cells() const { return servers_.size(); }
  std::size_t num_subchannels() const { return channel_.num_subchannels; }
  std::size_t num_slices() const { return slices_.size(); }

  const std::vector<User>& users() const { return users_; }
  const std::vector<Server>& servers() const { return servers_; }
  const std::vector<SliceSla>& slices() const { return slices_; }
  const ChannelState& channel() const { return channel_; }
  const User& user(std::size_t u) const { return users_[u]; }
  const SliceSla& slice_of(std::size_t u) const {
    return slices_[users_[u].slice_id];
  }

  /// h_{u,j,n}
  double gain(std::size_t u, std::size_t j, std::size_t n) const {
    return channel_.gains(u, j, n);
  }
  /// Hand-off delay between cells i and j (seconds, zero diagonal).
  double handoff(std::size_t i, std::size_t j) const { return handoff_(i, j); }
  const Eigen::MatrixXd& handoff_matrix() const { return handoff_; }

  /// Users associated with cell j.
  const std::vector<std::size_t>& cell_members(std::size_t j) const {
    return cell_members_[j];
  }
  /// Users subscribed to slice k.
  const std::vector<std::size_t>& slice_members(std::size_t k) const {
    return slice_members_[k];
  }

  /// S^E, the summed server speed.
  double total_server_capacity() const { return total_capacity_; }

  std::uint64_t rng_seed() const { return rng_seed_; }

 private:
  void validate() const;

  std::vector<User> users_;
  std::vector<Server> servers_;
  std::vector<SliceSla> slices_;
  ChannelState channel_;
  Eigen::MatrixXd handoff_;
  std::uint64_t rng_seed_ = 0;

  std::vector<std::vector<std::size_t>> cell_members_;
  std::vector<std::vector<std::size_t>> slice_members_;
  double total_capacity_ = 0.0;
};

/// Generator parameters. Defaults describe the two-cell, three-slice
/// baseline network.
struct GeneratorSpec {
  std::size_t num_cells = 2;
  std::size_t users_per_cell = 6;
  std::size_t num_subchannels = 16;
  std::size_t num_slices = 3;
  /// Per-slice profiles; when shorter than num_slices the default service
  /// table is used and shares are split evenly.
  std::vector<SliceSla> slices;

  double cell_spacing_m = 500.0;
  double cell_radius_m = 250.0;
  double min_distance_m = 10.0;
  double pathloss_intercept_db = 128.1;
  double pathloss_slope_db = 37.6;
  bool rayleigh_fading = true;

  double subchannel_bandwidth_hz = 180e3;
  double noise_psd_dbm_hz = -174.0;

  double task_size_bits = 8e6;
  std::vector<double> cycles_per_bit_choices = {1500.0, 2000.0, 2500.0};
  double local_cpu_hz = 1e9;
  double local_budget_cycles = 6e10;
  double max_power_dbm = 23.0;

  double server_capacity_hz = 20e9;
  double server_epoch_s = 8.0;
  double handoff_delay_s = 5e-3;
};

/// The default slice service table: inelastic, elastic, background.
std::vector<SliceSla> default_slice_profiles(std::size_t num_slices);

Scenario generate_scenario(const GeneratorSpec& spec, std::uint64_t seed);

/// Parses a scenario document (JSON). Documents either list users and gains
/// explicitly or carry generator parameters. `overrides` entries are dotted
/// `key=value` assignments applied before parsing, after the document's own
/// `overrides` section.
Scenario load_scenario(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides = {});
Scenario parse_scenario(const nlohmann::json& doc,
                        const std::vector<std::string>& overrides = {});

/// Reads generator parameters from a document (missing keys keep defaults).
GeneratorSpec parse_generator_spec(const nlohmann::json& doc);

/// Applies `key.path=value` to a JSON document. Values parse as JSON when
/// possible, otherwise as strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Fully explicit form (users and gains listed) that round-trips through
/// `parse_scenario`.
nlohmann::json scenario_to_json(const Scenario& s);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

double dbm_to_watts(double dbm);

}  // namespace mecslice
