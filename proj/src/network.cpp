#include "dtfl/network.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

namespace dtfl {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

namespace {

using nlohmann::json;

const std::set<std::string> kNetworkKeys = {
    "num_users",          "num_bs",          "num_subchannels",       "num_producers",
    "bs_cpu_freq_hz",     "validation_freq_hz", "bs_tx_power_dbm",    "mbs_tx_power_dbm",
    "uplink_bandwidth_hz", "downlink_bandwidth_hz", "subchannel_bandwidth_hz", "noise_dbm",
    "path_loss_exponent", "cycles_per_sample", "cycles_per_agg_unit", "cycles_per_validation_unit",
    "tx_factor",          "model_size_bits", "block_header_bits",     "bs_distance_m",
    "bs_ring_radius_m",   "cell_radius_m",   "min_samples",           "max_samples",
    "bytes_per_sample",   "seed"};

template <typename T>
void read(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("network.") + key + ": " + e.what());
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("network: " + what);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

NetworkConfig parse_network_config(const json& j) {
  if (!j.is_object()) throw ConfigError("network: expected an object");
  for (const auto& [key, _] : j.items())
    if (!kNetworkKeys.contains(key)) throw ConfigError("network: unknown key '" + key + "'");

  NetworkConfig c;
  read(j, "num_users", c.num_users);
  read(j, "num_bs", c.num_bs);
  read(j, "num_subchannels", c.num_subchannels);
  read(j, "num_producers", c.num_producers);
  read(j, "bs_cpu_freq_hz", c.bs_cpu_freq_hz);
  read(j, "validation_freq_hz", c.validation_freq_hz);
  read(j, "bs_tx_power_dbm", c.bs_tx_power_dbm);
  read(j, "mbs_tx_power_dbm", c.mbs_tx_power_dbm);
  if (j.contains("subchannel_bandwidth_hz")) {
    read(j, "subchannel_bandwidth_hz", c.uplink_bandwidth_hz);
    c.downlink_bandwidth_hz = c.uplink_bandwidth_hz;
  }
  read(j, "uplink_bandwidth_hz", c.uplink_bandwidth_hz);
  read(j, "downlink_bandwidth_hz", c.downlink_bandwidth_hz);
  read(j, "noise_dbm", c.noise_dbm);
  read(j, "path_loss_exponent", c.path_loss_exponent);
  read(j, "cycles_per_sample", c.cycles_per_sample);
  read(j, "cycles_per_agg_unit", c.cycles_per_agg_unit);
  read(j, "cycles_per_validation_unit", c.cycles_per_validation_unit);
  read(j, "tx_factor", c.tx_factor);
  read(j, "model_size_bits", c.model_size_bits);
  read(j, "block_header_bits", c.block_header_bits);
  read(j, "bs_distance_m", c.bs_distance_m);
  read(j, "bs_ring_radius_m", c.bs_ring_radius_m);
  read(j, "cell_radius_m", c.cell_radius_m);
  read(j, "min_samples", c.min_samples);
  read(j, "max_samples", c.max_samples);
  read(j, "bytes_per_sample", c.bytes_per_sample);
  read(j, "seed", c.seed);
  return c;
}

nlohmann::json to_json(const NetworkConfig& c) {
  json j;
  j["num_users"] = c.num_users;
  j["num_bs"] = c.num_bs;
  j["num_subchannels"] = c.num_subchannels;
  j["num_producers"] = c.num_producers;
  j["bs_cpu_freq_hz"] = c.bs_cpu_freq_hz;
  if (!c.validation_freq_hz.empty()) j["validation_freq_hz"] = c.validation_freq_hz;
  j["bs_tx_power_dbm"] = c.bs_tx_power_dbm;
  j["mbs_tx_power_dbm"] = c.mbs_tx_power_dbm;
  j["uplink_bandwidth_hz"] = c.uplink_bandwidth_hz;
  j["downlink_bandwidth_hz"] = c.downlink_bandwidth_hz;
  j["noise_dbm"] = c.noise_dbm;
  j["path_loss_exponent"] = c.path_loss_exponent;
  j["cycles_per_sample"] = c.cycles_per_sample;
  j["cycles_per_agg_unit"] = c.cycles_per_agg_unit;
  j["cycles_per_validation_unit"] = c.cycles_per_validation_unit;
  j["tx_factor"] = c.tx_factor;
  j["model_size_bits"] = c.model_size_bits;
  j["block_header_bits"] = c.block_header_bits;
  if (!c.bs_distance_m.empty()) j["bs_distance_m"] = c.bs_distance_m;
  j["bs_ring_radius_m"] = c.bs_ring_radius_m;
  j["cell_radius_m"] = c.cell_radius_m;
  j["min_samples"] = c.min_samples;
  j["max_samples"] = c.max_samples;
  j["bytes_per_sample"] = c.bytes_per_sample;
  j["seed"] = c.seed;
  return j;
}

double NetworkModel::total_data() const {
  return std::accumulate(user_data_sizes.begin(), user_data_sizes.end(), 0.0);
}

NetworkModel build_network(const NetworkConfig& c) {
  require(c.num_users >= 1, "num_users must be >= 1");
  require(c.num_bs >= 1, "num_bs must be >= 1");
  require(c.num_subchannels >= 1, "num_subchannels must be >= 1");
  require(c.num_producers >= 1, "num_producers must be >= 1");
  require(c.num_producers <= c.num_bs, "num_producers (" + std::to_string(c.num_producers) +
                                           ") exceeds num_bs (" + std::to_string(c.num_bs) + ")");
  require(c.bs_cpu_freq_hz.size() == c.num_bs, "bs_cpu_freq_hz needs one entry per BS");
  for (double f : c.bs_cpu_freq_hz) require(positive(f), "CPU frequencies must be > 0");
  require(c.validation_freq_hz.empty() || c.validation_freq_hz.size() == c.num_bs,
          "validation_freq_hz needs one entry per BS");
  for (double f : c.validation_freq_hz) require(positive(f), "validation frequencies must be > 0");
  require(std::isfinite(c.bs_tx_power_dbm) && std::isfinite(c.mbs_tx_power_dbm), "transmit powers must be finite");
  require(std::isfinite(c.noise_dbm), "noise_dbm must be finite");
  require(positive(c.uplink_bandwidth_hz) && positive(c.downlink_bandwidth_hz), "bandwidths must be > 0");
  require(std::isfinite(c.path_loss_exponent) && c.path_loss_exponent >= 0.0, "path_loss_exponent must be >= 0");
  require(positive(c.cycles_per_sample), "cycles_per_sample must be > 0");
  require(positive(c.cycles_per_agg_unit), "cycles_per_agg_unit must be > 0");
  require(positive(c.cycles_per_validation_unit), "cycles_per_validation_unit must be > 0");
  require(positive(c.tx_factor), "tx_factor must be > 0");
  require(positive(c.model_size_bits), "model_size_bits must be > 0");
  require(positive(c.block_header_bits), "block_header_bits must be > 0");
  require(positive(c.bytes_per_sample), "bytes_per_sample must be > 0");
  require(c.bs_distance_m.empty() || c.bs_distance_m.size() == c.num_bs, "bs_distance_m needs one entry per BS");
  for (double r : c.bs_distance_m) require(positive(r), "BS distances must be > 0");
  require(positive(c.bs_ring_radius_m), "bs_ring_radius_m must be > 0");
  require(positive(c.cell_radius_m), "cell_radius_m must be > 0");
  require(c.min_samples <= c.max_samples, "min_samples must not exceed max_samples");

  NetworkModel net;
  net.num_users = c.num_users;
  net.num_bs = c.num_bs;
  net.num_subchannels = c.num_subchannels;
  net.num_producers = c.num_producers;
  net.bs_cpu_freq = c.bs_cpu_freq_hz;
  net.validation_freq = c.validation_freq_hz.empty() ? c.bs_cpu_freq_hz : c.validation_freq_hz;
  net.bs_tx_power = dbm_to_watts(c.bs_tx_power_dbm);
  net.mbs_tx_power = dbm_to_watts(c.mbs_tx_power_dbm);
  net.uplink_bandwidth = c.uplink_bandwidth_hz;
  net.downlink_bandwidth = c.downlink_bandwidth_hz;
  net.noise_power = dbm_to_watts(c.noise_dbm);
  net.path_loss_exponent = c.path_loss_exponent;
  net.cycles_per_sample = c.cycles_per_sample;
  net.cycles_per_agg_unit = c.cycles_per_agg_unit;
  net.cycles_per_validation_unit = c.cycles_per_validation_unit;
  net.tx_factor = c.tx_factor;
  net.model_size_bits = c.model_size_bits;
  net.block_header_bits = c.block_header_bits;
  net.bytes_per_sample = c.bytes_per_sample;

  // BSs sit on rays from the MBS at evenly spaced angles.
  net.mbs_position = {0.0, 0.0};
  for (std::size_t i = 0; i < c.num_bs; ++i) {
    const double r = c.bs_distance_m.empty() ? c.bs_ring_radius_m : c.bs_distance_m[i];
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(c.num_bs);
    net.bs_positions.push_back({r * std::cos(angle), r * std::sin(angle)});
  }

  Rng rng = make_rng(c.seed, 0x6e6574);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> samples(c.min_samples, c.max_samples);
  for (std::size_t u = 0; u < c.num_users; ++u) {
    const std::size_t home = u % c.num_bs;
    const double rho = c.cell_radius_m * std::sqrt(unit(rng));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    const Point centre = net.bs_positions[home];
    net.user_positions.push_back({centre.x + rho * std::cos(phi), centre.y + rho * std::sin(phi)});
    net.user_home_bs.push_back(home);
    net.user_data_sizes.push_back(static_cast<double>(samples(rng)));
  }
  return net;
}

Association::Association(std::vector<double> data_sizes, std::size_t num_bs)
    : data_sizes_(std::move(data_sizes)), bs_of_(data_sizes_.size(), kUnassigned), num_bs_(num_bs) {
  for (double d : data_sizes_)
    if (!(d >= 0.0)) throw std::invalid_argument("data sizes must be >= 0");
}

Association Association::round_robin(std::vector<double> data_sizes, std::size_t num_bs) {
  Association a(std::move(data_sizes), num_bs);
  for (std::size_t i = 0; i < a.num_twins(); ++i) a.assign(i, i % num_bs);
  return a;
}

double Association::phi(std::size_t twin, std::size_t bs) const {
  if (twin >= num_twins() || bs >= num_bs_) throw std::out_of_range("association index");
  return bs_of_[twin] == bs ? data_sizes_[twin] : 0.0;
}

std::optional<std::size_t> Association::bs_of(std::size_t twin) const {
  const std::size_t b = bs_of_.at(twin);
  if (b == kUnassigned) return std::nullopt;
  return b;
}

bool Association::complete() const {
  for (std::size_t b : bs_of_)
    if (b == kUnassigned) return false;
  return true;
}

std::vector<std::size_t> Association::twins_of(std::size_t bs) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bs_of_.size(); ++i)
    if (bs_of_[i] == bs) out.push_back(i);
  return out;
}

double Association::data_on(std::size_t bs) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < bs_of_.size(); ++i)
    if (bs_of_[i] == bs) sum += data_sizes_[i];
  return sum;
}

void Association::assign(std::size_t twin, std::size_t bs) {
  if (twin >= num_twins()) throw std::out_of_range("unknown twin " + std::to_string(twin));
  if (bs >= num_bs_) throw std::out_of_range("unknown BS " + std::to_string(bs));
  bs_of_[twin] = bs;
}

Association associate(std::size_t twin, std::size_t bs, Association assoc) {
  assoc.assign(twin, bs);
  return assoc;
}

std::size_t twin_count(const Association& assoc, std::size_t bs) {
  if (bs >= assoc.num_bs()) throw std::out_of_range("unknown BS " + std::to_string(bs));
  std::size_t k = 0;
  for (std::size_t i = 0; i < assoc.num_twins(); ++i)
    if (assoc.phi(i, bs) > 0.0) ++k;
  return k;
}

std::vector<std::size_t> twin_counts(const Association& assoc) {
  std::vector<std::size_t> k(assoc.num_bs(), 0);
  for (std::size_t i = 0; i < assoc.num_twins(); ++i)
    if (auto b = assoc.bs_of(i); b && assoc.data_size(i) > 0.0) ++k[*b];
  return k;
}

}  // namespace dtfl
