#include "mecslice/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace mecslice {

using nlohmann::json;

namespace {

constexpr double kShareSlack = 1e-12;

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ValidationError(field, what);
}

std::string indexed(const std::string& base, std::size_t i,
                    const std::string& leaf) {
  return base + "[" + std::to_string(i) + "]." + leaf;
}

}  // namespace

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

Scenario::Scenario(std::vector<User> users, std::vector<Server> servers,
                   std::vector<SliceSla> slices, ChannelState channel,
                   Eigen::MatrixXd handoff, std::uint64_t rng_seed)
    : users_(std::move(users)),
      servers_(std::move(servers)),
      slices_(std::move(slices)),
      channel_(std::move(channel)),
      handoff_(std::move(handoff)),
      rng_seed_(rng_seed) {
  validate();
  cell_members_.resize(servers_.size());
  slice_members_.resize(slices_.size());
  for (std::size_t u = 0; u < users_.size(); ++u) {
    users_[u].user_id = u;
    cell_members_[users_[u].serving_server].push_back(u);
    slice_members_[users_[u].slice_id].push_back(u);
  }
  for (std::size_t j = 0; j < servers_.size(); ++j) {
    servers_[j].server_id = j;
    total_capacity_ += servers_[j].capacity;
  }
  for (std::size_t k = 0; k < slices_.size(); ++k) slices_[k].slice_id = k;
}

void Scenario::validate() const {
  require(!servers_.empty(), "network.num_cells", "at least one cell required");
  require(!users_.empty(), "users", "at least one user required");
  require(!slices_.empty(), "slices", "at least one slice required");
  require(channel_.num_subchannels > 0, "network.num_subchannels",
          "at least one subchannel required");

  double alpha_sum = 0.0, beta_sum = 0.0;
  for (std::size_t k = 0; k < slices_.size(); ++k) {
    const auto& sl = slices_[k];
    require(sl.lambda > 0.0, indexed("slices", k, "lambda"), "must be > 0");
    require(sl.delay_target > 0.0, indexed("slices", k, "delay_target_s"),
            "must be > 0");
    require(sl.bandwidth_share >= 0.0 && sl.bandwidth_share <= 1.0,
            indexed("slices", k, "bandwidth_share"), "must lie in [0,1]");
    require(sl.compute_share >= 0.0 && sl.compute_share <= 1.0,
            indexed("slices", k, "compute_share"), "must lie in [0,1]");
    alpha_sum += sl.bandwidth_share;
    beta_sum += sl.compute_share;
  }
  require(alpha_sum <= 1.0 + kShareSlack, "slices.bandwidth_share",
          "shares sum to " + std::to_string(alpha_sum) + " > 1");
  require(beta_sum <= 1.0 + kShareSlack, "slices.compute_share",
          "shares sum to " + std::to_string(beta_sum) + " > 1");

  for (std::size_t j = 0; j < servers_.size(); ++j) {
    require(servers_[j].capacity > 0.0,
            indexed("network.servers", j, "capacity_hz"), "must be > 0");
    require(servers_[j].cycle_budget > 0.0,
            indexed("network.servers", j, "cycle_budget"), "must be > 0");
  }

  for (std::size_t u = 0; u < users_.size(); ++u) {
    const auto& us = users_[u];
    require(us.slice_id < slices_.size(), indexed("users", u, "slice"),
            "references a missing slice");
    require(us.serving_server < servers_.size(),
            indexed("users", u, "serving_server"), "not a valid cell index");
    require(us.task.size_bits > 0.0, indexed("users", u, "size_bits"),
            "must be > 0");
    require(us.task.cycles_per_bit > 0.0,
            indexed("users", u, "cycles_per_bit"), "must be > 0");
    require(us.local_cpu > 0.0, indexed("users", u, "local_cpu_hz"),
            "must be > 0");
    require(us.local_budget >= 0.0, indexed("users", u, "local_budget_cycles"),
            "must be >= 0");
    require(us.max_power > 0.0, indexed("users", u, "max_power_w"),
            "must be > 0");
  }

  const auto& g = channel_.gains;
  require(g.users() == users_.size() && g.cells() == servers_.size() &&
              g.subchannels() == channel_.num_subchannels,
          "channel.gains", "shape must be users x cells x subchannels");
  for (double v : g.data())
    require(std::isfinite(v) && v >= 0.0, "channel.gains",
            "gains must be finite and >= 0");
  require(channel_.noise_power > 0.0, "channel.noise_power_w", "must be > 0");
  require(channel_.subchannel_bandwidth > 0.0,
          "channel.subchannel_bandwidth_hz", "must be > 0");

  const auto m = static_cast<Eigen::Index>(servers_.size());
  require(handoff_.rows() == m && handoff_.cols() == m, "network.handoff_s",
          "must be cells x cells");
  for (Eigen::Index i = 0; i < m; ++i) {
    require(handoff_(i, i) == 0.0, "network.handoff_s", "diagonal must be 0");
    for (Eigen::Index j = 0; j < m; ++j)
      require(std::isfinite(handoff_(i, j)) && handoff_(i, j) >= 0.0,
              "network.handoff_s", "entries must be >= 0");
  }
}

std::vector<SliceSla> default_slice_profiles(std::size_t num_slices) {
  // inelastic, elastic, background
  static constexpr double kLambda[] = {3.0, 2.0, 1.0};
  static constexpr double kTarget[] = {0.05, 0.1, 5.0};
  std::vector<SliceSla> out(num_slices);
  for (std::size_t k = 0; k < num_slices; ++k) {
    out[k].slice_id = k;
    out[k].lambda = kLambda[k % 3];
    out[k].delay_target = kTarget[k % 3];
    out[k].bandwidth_share = 1.0 / static_cast<double>(num_slices);
    out[k].compute_share = 1.0 / static_cast<double>(num_slices);
  }
  return out;
}

Scenario generate_scenario(const GeneratorSpec& spec, std::uint64_t seed) {
  require(spec.num_cells > 0, "network.num_cells", "must be >= 1");
  require(spec.users_per_cell > 0, "network.users_per_cell", "must be >= 1");
  require(spec.num_subchannels > 0, "network.num_subchannels", "must be >= 1");
  require(spec.num_slices > 0 || !spec.slices.empty(), "network.num_slices",
          "must be >= 1");
  require(!spec.cycles_per_bit_choices.empty(), "users.cycles_per_bit_choices",
          "must not be empty");

  std::vector<SliceSla> slices = spec.slices;
  if (slices.empty()) slices = default_slice_profiles(spec.num_slices);

  const std::size_t m = spec.num_cells;
  const std::size_t n_sub = spec.num_subchannels;
  const std::size_t n_users = m * spec.users_per_cell;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> rayleigh_power(1.0);
  std::uniform_int_distribution<std::size_t> pick_cycles(
      0, spec.cycles_per_bit_choices.size() - 1);

  struct Drop {
    double x, y;
  };
  std::vector<Drop> drops;
  drops.reserve(n_users);
  for (std::size_t j = 0; j < m; ++j) {
    const double cx = static_cast<double>(j) * spec.cell_spacing_m;
    for (std::size_t i = 0; i < spec.users_per_cell; ++i) {
      // Uniform over the disc, excluding the inner exclusion radius.
      const double r0 = spec.min_distance_m / spec.cell_radius_m;
      const double r = spec.cell_radius_m *
                       std::sqrt(r0 * r0 + (1.0 - r0 * r0) * unit(rng));
      const double angle = 2.0 * M_PI * unit(rng);
      drops.push_back({cx + r * std::cos(angle), r * std::sin(angle)});
    }
  }

  GainTensor gains(n_users, m, n_sub);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t j = 0; j < m; ++j) {
      const double dx = drops[u].x - static_cast<double>(j) * spec.cell_spacing_m;
      const double d_km =
          std::max(std::hypot(dx, drops[u].y), spec.min_distance_m) / 1000.0;
      const double pl_db =
          spec.pathloss_intercept_db + spec.pathloss_slope_db * std::log10(d_km);
      const double mean_gain = std::pow(10.0, -pl_db / 10.0);
      for (std::size_t n = 0; n < n_sub; ++n)
        gains(u, j, n) =
            mean_gain * (spec.rayleigh_fading ? rayleigh_power(rng) : 1.0);
    }
  }

  std::vector<User> users(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    User& us = users[u];
    us.user_id = u;
    us.slice_id = u % slices.size();
    us.task.size_bits = spec.task_size_bits;
    us.task.cycles_per_bit = spec.cycles_per_bit_choices[pick_cycles(rng)];
    us.local_cpu = spec.local_cpu_hz;
    us.local_budget = spec.local_budget_cycles;
    us.max_power = dbm_to_watts(spec.max_power_dbm);

    // Associate with the cell of strongest subchannel-averaged gain.
    std::size_t best = 0;
    double best_avg = -1.0;
    for (std::size_t j = 0; j < m; ++j) {
      double avg = 0.0;
      for (std::size_t n = 0; n < n_sub; ++n) avg += gains(u, j, n);
      avg /= static_cast<double>(n_sub);
      if (avg > best_avg) {
        best_avg = avg;
        best = j;
      }
    }
    us.serving_server = best;
  }

  std::vector<Server> servers(m);
  for (std::size_t j = 0; j < m; ++j) {
    servers[j].server_id = j;
    servers[j].capacity = spec.server_capacity_hz;
    servers[j].cycle_budget = spec.server_capacity_hz * spec.server_epoch_s;
  }

  ChannelState channel;
  channel.gains = std::move(gains);
  channel.num_subchannels = n_sub;
  channel.subchannel_bandwidth = spec.subchannel_bandwidth_hz;
  channel.noise_power = dbm_to_watts(spec.noise_psd_dbm_hz) *
                        spec.subchannel_bandwidth_hz;

  Eigen::MatrixXd handoff = Eigen::MatrixXd::Constant(
      static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m),
      spec.handoff_delay_s);
  handoff.diagonal().setZero();

  return Scenario(std::move(users), std::move(servers), std::move(slices),
                  std::move(channel), std::move(handoff), seed);
}

// ---------------------------------------------------------------------------
// Document parsing

namespace {

template <typename T>
void read_opt(const json& obj, const char* key, T& out,
              const std::string& section) {
  if (!obj.is_object() || !obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(section + "." + key + ": " + e.what());
  }
}

json section_of(const json& doc, const char* key) {
  if (!doc.contains(key)) return json::object();
  const json& s = doc.at(key);
  if (!s.is_object() && !s.is_array())
    throw ParseError(std::string(key) + ": expected an object or array");
  return s;
}

std::vector<SliceSla> parse_slices(const json& doc) {
  std::vector<SliceSla> out;
  if (!doc.contains("slices")) return out;
  const json& arr = doc.at("slices");
  if (!arr.is_array()) throw ParseError("slices: expected an array");
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const std::string where = "slices[" + std::to_string(k) + "]";
    SliceSla sl;
    sl.slice_id = k;
    read_opt(arr[k], "lambda", sl.lambda, where);
    read_opt(arr[k], "delay_target_s", sl.delay_target, where);
    read_opt(arr[k], "bandwidth_share", sl.bandwidth_share, where);
    read_opt(arr[k], "compute_share", sl.compute_share, where);
    out.push_back(sl);
  }
  return out;
}

Scenario parse_explicit(const json& doc, const GeneratorSpec& gen,
                        std::uint64_t seed) {
  const json net = section_of(doc, "network");
  const json chan = section_of(doc, "channel");
  const json& arr = doc.at("users");

  std::vector<SliceSla> slices = parse_slices(doc);
  if (slices.empty()) slices = default_slice_profiles(gen.num_slices);

  std::vector<Server> servers;
  if (net.contains("servers")) {
    const json& sv = net.at("servers");
    if (!sv.is_array()) throw ParseError("network.servers: expected an array");
    for (std::size_t j = 0; j < sv.size(); ++j) {
      const std::string where = "network.servers[" + std::to_string(j) + "]";
      Server s;
      s.capacity = gen.server_capacity_hz;
      read_opt(sv[j], "capacity_hz", s.capacity, where);
      s.cycle_budget = s.capacity * gen.server_epoch_s;
      read_opt(sv[j], "cycle_budget", s.cycle_budget, where);
      servers.push_back(s);
    }
  } else {
    servers.resize(gen.num_cells);
    for (auto& s : servers) {
      s.capacity = gen.server_capacity_hz;
      s.cycle_budget = gen.server_capacity_hz * gen.server_epoch_s;
    }
  }
  const std::size_t m = servers.size();

  std::vector<User> users;
  for (std::size_t u = 0; u < arr.size(); ++u) {
    const std::string where = "users[" + std::to_string(u) + "]";
    const json& ju = arr[u];
    if (!ju.is_object()) throw ParseError(where + ": expected an object");
    User us;
    us.task.size_bits = gen.task_size_bits;
    us.task.cycles_per_bit = gen.cycles_per_bit_choices.front();
    us.local_cpu = gen.local_cpu_hz;
    us.local_budget = gen.local_budget_cycles;
    us.max_power = dbm_to_watts(gen.max_power_dbm);
    if (!ju.contains("serving_server"))
      throw ParseError(where + ".serving_server: required");
    read_opt(ju, "slice", us.slice_id, where);
    read_opt(ju, "serving_server", us.serving_server, where);
    read_opt(ju, "size_bits", us.task.size_bits, where);
    read_opt(ju, "cycles_per_bit", us.task.cycles_per_bit, where);
    read_opt(ju, "local_cpu_hz", us.local_cpu, where);
    read_opt(ju, "local_budget_cycles", us.local_budget, where);
    read_opt(ju, "max_power_w", us.max_power, where);
    users.push_back(us);
  }

  if (!chan.contains("gains"))
    throw ParseError("channel.gains: required when users are listed explicitly");
  const json& jg = chan.at("gains");
  if (!jg.is_array() || jg.size() != users.size())
    throw ParseError("channel.gains: expected one entry per user");
  std::size_t n_sub = gen.num_subchannels;
  if (!jg.empty() && jg[0].is_array() && !jg[0].empty() && jg[0][0].is_array())
    n_sub = jg[0][0].size();
  GainTensor gains(users.size(), m, n_sub);
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (!jg[u].is_array() || jg[u].size() != m)
      throw ParseError("channel.gains[" + std::to_string(u) +
                       "]: expected one row per cell");
    for (std::size_t j = 0; j < m; ++j) {
      const json& row = jg[u][j];
      if (!row.is_array() || row.size() != n_sub)
        throw ParseError("channel.gains[" + std::to_string(u) + "][" +
                         std::to_string(j) + "]: expected one gain per subchannel");
      for (std::size_t n = 0; n < n_sub; ++n) {
        if (!row[n].is_number())
          throw ParseError("channel.gains: non-numeric entry");
        gains(u, j, n) = row[n].get<double>();
      }
    }
  }

  ChannelState channel;
  channel.gains = std::move(gains);
  channel.num_subchannels = n_sub;
  channel.subchannel_bandwidth = gen.subchannel_bandwidth_hz;
  channel.noise_power =
      dbm_to_watts(gen.noise_psd_dbm_hz) * gen.subchannel_bandwidth_hz;
  read_opt(chan, "noise_power_w", channel.noise_power, "channel");

  Eigen::MatrixXd handoff = Eigen::MatrixXd::Constant(
      static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m),
      gen.handoff_delay_s);
  handoff.diagonal().setZero();
  if (net.contains("handoff_s")) {
    const json& h = net.at("handoff_s");
    if (!h.is_array() || h.size() != m)
      throw ParseError("network.handoff_s: expected cells x cells matrix");
    for (std::size_t i = 0; i < m; ++i) {
      if (!h[i].is_array() || h[i].size() != m)
        throw ParseError("network.handoff_s: expected cells x cells matrix");
      for (std::size_t j = 0; j < m; ++j)
        handoff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            h[i][j].get<double>();
    }
  }

  return Scenario(std::move(users), std::move(servers), std::move(slices),
                  std::move(channel), std::move(handoff), seed);
}

}  // namespace

GeneratorSpec parse_generator_spec(const json& doc) {
  GeneratorSpec g;
  const json net = section_of(doc, "network");
  read_opt(net, "num_cells", g.num_cells, "network");
  read_opt(net, "users_per_cell", g.users_per_cell, "network");
  read_opt(net, "num_subchannels", g.num_subchannels, "network");
  read_opt(net, "num_slices", g.num_slices, "network");
  read_opt(net, "cell_spacing_m", g.cell_spacing_m, "network");
  read_opt(net, "cell_radius_m", g.cell_radius_m, "network");
  read_opt(net, "min_distance_m", g.min_distance_m, "network");
  read_opt(net, "server_capacity_hz", g.server_capacity_hz, "network");
  read_opt(net, "server_epoch_s", g.server_epoch_s, "network");
  read_opt(net, "handoff_delay_s", g.handoff_delay_s, "network");

  const json chan = section_of(doc, "channel");
  read_opt(chan, "subchannel_bandwidth_hz", g.subchannel_bandwidth_hz, "channel");
  read_opt(chan, "noise_psd_dbm_hz", g.noise_psd_dbm_hz, "channel");
  read_opt(chan, "pathloss_intercept_db", g.pathloss_intercept_db, "channel");
  read_opt(chan, "pathloss_slope_db", g.pathloss_slope_db, "channel");
  read_opt(chan, "rayleigh_fading", g.rayleigh_fading, "channel");

  const json users = section_of(doc, "users");
  if (users.is_object()) {
    read_opt(users, "task_size_bits", g.task_size_bits, "users");
    read_opt(users, "cycles_per_bit_choices", g.cycles_per_bit_choices, "users");
    read_opt(users, "local_cpu_hz", g.local_cpu_hz, "users");
    read_opt(users, "local_budget_cycles", g.local_budget_cycles, "users");
    read_opt(users, "max_power_dbm", g.max_power_dbm, "users");
  }

  g.slices = parse_slices(doc);
  if (!g.slices.empty()) g.num_slices = g.slices.size();
  return g;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ParseError("override '" + assignment + "': expected key=value");
  std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  std::string pointer;
  std::stringstream ks(key);
  for (std::string part; std::getline(ks, part, '.');) pointer += "/" + part;
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  try {
    doc[json::json_pointer(pointer)] = std::move(value);
  } catch (const json::exception& e) {
    throw ParseError("override '" + assignment + "': " + e.what());
  }
}

Scenario parse_scenario(const json& input,
                        const std::vector<std::string>& overrides) {
  if (!input.is_object()) throw ParseError("scenario: expected a JSON object");
  json doc = input;
  if (doc.contains("overrides")) {
    const json& ov = doc.at("overrides");
    if (!ov.is_object()) throw ParseError("overrides: expected an object");
    const json copy = ov;
    for (const auto& [k, v] : copy.items()) apply_override(doc, k + "=" + v.dump());
  }
  for (const auto& a : overrides) apply_override(doc, a);

  std::uint64_t seed = 0;
  read_opt(doc, "seed", seed, "scenario");
  const GeneratorSpec gen = parse_generator_spec(doc);
  if (doc.contains("users") && doc.at("users").is_array())
    return parse_explicit(doc, gen, seed);
  return generate_scenario(gen, seed);
}

Scenario load_scenario(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ParseError(path.string() + ": malformed JSON");
  return parse_scenario(doc, overrides);
}

json scenario_to_json(const Scenario& s) {
  json doc;
  doc["seed"] = s.rng_seed();
  json servers = json::array();
  for (const auto& sv : s.servers())
    servers.push_back({{"capacity_hz", sv.capacity},
                       {"cycle_budget", sv.cycle_budget}});
  json handoff = json::array();
  for (std::size_t i = 0; i < s.num_cells(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < s.num_cells(); ++j) row.push_back(s.handoff(i, j));
    handoff.push_back(row);
  }
  doc["network"] = {{"num_cells", s.num_cells()},
                    {"num_subchannels", s.num_subchannels()},
                    {"servers", servers},
                    {"handoff_s", handoff}};
  json slices = json::array();
  for (const auto& sl : s.slices())
    slices.push_back({{"lambda", sl.lambda},
                      {"delay_target_s", sl.delay_target},
                      {"bandwidth_share", sl.bandwidth_share},
                      {"compute_share", sl.compute_share}});
  doc["slices"] = slices;
  json users = json::array();
  for (const auto& us : s.users())
    users.push_back({{"slice", us.slice_id},
                     {"serving_server", us.serving_server},
                     {"size_bits", us.task.size_bits},
                     {"cycles_per_bit", us.task.cycles_per_bit},
                     {"local_cpu_hz", us.local_cpu},
                     {"local_budget_cycles", us.local_budget},
                     {"max_power_w", us.max_power}});
  doc["users"] = users;
  json gains = json::array();
  for (std::size_t u = 0; u < s.num_users(); ++u) {
    json per_cell = json::array();
    for (std::size_t j = 0; j < s.num_cells(); ++j) {
      json row = json::array();
      for (std::size_t n = 0; n < s.num_subchannels(); ++n)
        row.push_back(s.gain(u, j, n));
      per_cell.push_back(row);
    }
    gains.push_back(per_cell);
  }
  doc["channel"] = {{"subchannel_bandwidth_hz", s.channel().subchannel_bandwidth},
                    {"noise_power_w", s.channel().noise_power},
                    {"gains", gains}};
  return doc;
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << scenario_to_json(s).dump(1) << '\n';
}

}  // namespace mecslice
