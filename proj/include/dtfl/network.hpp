#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dtfl/common.hpp"
#include "dtfl/dataset.hpp"
#include "dtfl/model_params.hpp"

namespace dtfl {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

/// Raw network description as read from the config file. Units are SI
/// except transmit powers, which are given in dBm.
struct NetworkConfig {
  std::size_t num_users = 20;
  std::size_t num_bs = 5;
  std::size_t num_subchannels = 5;
  std::size_t num_producers = 3;
  std::vector<double> bs_cpu_freq_hz{2.6e9, 1.8e9, 3.6e9, 2.4e9, 2.4e9};
  std::vector<double> validation_freq_hz;  // empty: same as bs_cpu_freq_hz
  double bs_tx_power_dbm = 34.0;
  double mbs_tx_power_dbm = 42.0;
  double uplink_bandwidth_hz = 30e6;
  double downlink_bandwidth_hz = 30e6;
  double noise_dbm = -174.0;
  double path_loss_exponent = 3.5;
  double cycles_per_sample = 5e7;
  double cycles_per_agg_unit = 10.0;
  double cycles_per_validation_unit = 1.0;
  double tx_factor = 1.0;
  double model_size_bits = 5e7;
  double block_header_bits = 1e3;
  std::vector<double> bs_distance_m;  // empty: all BSs on bs_ring_radius_m
  double bs_ring_radius_m = 400.0;
  double cell_radius_m = 150.0;
  std::size_t min_samples = 20;
  std::size_t max_samples = 60;
  double bytes_per_sample = 3072.0;
  std::uint64_t seed = 1;
};

/// Parses the "network" object of a config file. Unknown keys are rejected
/// so that typos do not silently fall back to defaults.
NetworkConfig parse_network_config(const nlohmann::json& j);
nlohmann::json to_json(const NetworkConfig& c);

/// Static topology and physical constants, validated and converted to SI.
struct NetworkModel {
  std::size_t num_users = 0;
  std::size_t num_bs = 0;
  std::size_t num_subchannels = 0;
  std::size_t num_producers = 0;
  std::vector<double> bs_cpu_freq;      // f_i^C, cycles/s
  std::vector<double> validation_freq;  // f_i^s, cycles/s
  double bs_tx_power = 0.0;             // P^U, W per subchannel
  double mbs_tx_power = 0.0;            // P^D, W per subchannel
  double uplink_bandwidth = 0.0;        // W^U, Hz
  double downlink_bandwidth = 0.0;      // W^D, Hz
  double noise_power = 0.0;             // N0, W
  double path_loss_exponent = 0.0;
  double cycles_per_sample = 0.0;
  double cycles_per_agg_unit = 0.0;
  double cycles_per_validation_unit = 0.0;
  double tx_factor = 0.0;
  double model_size_bits = 0.0;
  double block_header_bits = 0.0;
  double bytes_per_sample = 0.0;
  Point mbs_position;
  std::vector<Point> bs_positions;
  std::vector<Point> user_positions;
  std::vector<std::size_t> user_home_bs;  // BS whose coverage disc the user was placed in
  std::vector<double> user_data_sizes;    // D_i, samples

  double bs_distance(std::size_t bs) const { return distance(bs_positions.at(bs), mbs_position); }
  double total_data() const;
};

/// Validates the config and places users. Deterministic in config.seed.
/// Throws ConfigError on any invariant violation.
NetworkModel build_network(const NetworkConfig& config);

/// Edge association: every twin is mapped to at most one BS, Phi(i, j) is
/// D_i for the chosen BS and 0 elsewhere.
class Association {
 public:
  Association() = default;
  Association(std::vector<double> data_sizes, std::size_t num_bs);

  /// Twin i goes to BS (i mod M).
  static Association round_robin(std::vector<double> data_sizes, std::size_t num_bs);

  std::size_t num_twins() const { return data_sizes_.size(); }
  std::size_t num_bs() const { return num_bs_; }
  double data_size(std::size_t twin) const { return data_sizes_.at(twin); }
  const std::vector<double>& data_sizes() const { return data_sizes_; }

  double phi(std::size_t twin, std::size_t bs) const;
  std::optional<std::size_t> bs_of(std::size_t twin) const;
  bool complete() const;
  std::vector<std::size_t> twins_of(std::size_t bs) const;
  double data_on(std::size_t bs) const;

  /// Throws std::out_of_range for unknown twin or BS.
  void assign(std::size_t twin, std::size_t bs);

  friend bool operator==(const Association&, const Association&) = default;

 private:
  static constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);
  std::vector<double> data_sizes_;
  std::vector<std::size_t> bs_of_;
  std::size_t num_bs_ = 0;
};

Association associate(std::size_t twin, std::size_t bs, Association assoc);

/// K_i: number of twins whose row has a nonzero entry in column `bs`.
std::size_t twin_count(const Association& assoc, std::size_t bs);
std::vector<std::size_t> twin_counts(const Association& assoc);

/// Timestamped opaque state vector of a twin.
struct DynamicState {
  double timestamp = 0.0;
  std::vector<double> values;
};

/// Server-side replica of one end user.
struct DigitalTwin {
  std::size_t id = 0;
  std::size_t owner_user = 0;
  Dataset data;
  ModelParams behavior_model;
  DynamicState state;

  double data_size() const { return static_cast<double>(data.size()); }
};

}  // namespace dtfl
