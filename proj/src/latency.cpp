#include "dtfl/latency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dtfl {

namespace {

// ceil() that ignores representation error, so 1/(1-0.8) = 5.000000000000001
// still rounds to 5.
std::size_t ceil_tolerant(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

void check_bs(std::size_t bs, const NetworkModel& net) {
  if (bs >= net.num_bs) throw std::out_of_range("unknown BS " + std::to_string(bs));
}

}  // namespace

void AccuracyTargets::validate() const {
  auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!open_unit(theta_local) && theta_local != 1.0) throw ConfigError("theta_local must be in (0, 1]");
  if (!open_unit(theta_global)) throw ConfigError("theta_global must be in (0, 1)");
  if (!open_unit(theta_threshold)) throw ConfigError("theta_threshold must be in (0, 1)");
  if (theta_global < theta_threshold) throw ConfigError("theta_global must be >= theta_threshold");
  if (!(smoothness > 0.0)) throw ConfigError("smoothness constant must be > 0");
}

double local_training_time(std::size_t bs, const Association& assoc, std::span<const double> batch_fracs,
                           const NetworkModel& net) {
  check_bs(bs, net);
  if (batch_fracs.size() != assoc.num_twins()) throw std::invalid_argument("one batch fraction per twin expected");
  double samples = 0.0;
  for (std::size_t j = 0; j < assoc.num_twins(); ++j) {
    if (assoc.bs_of(j) != bs) continue;
    const double b = batch_fracs[j];
    if (!(b > 0.0 && b <= 1.0)) throw std::domain_error("batch fraction outside (0, 1]");
    samples += b * assoc.data_size(j);
  }
  return samples * net.cycles_per_sample / net.bs_cpu_freq[bs];
}

double local_aggregation_time(std::size_t bs, const Association& assoc, const NetworkModel& net) {
  check_bs(bs, net);
  const double k = static_cast<double>(twin_count(assoc, bs));
  return k * net.model_size_bits * net.cycles_per_agg_unit / net.bs_cpu_freq[bs];
}

double model_broadcast_time(std::size_t twins, double uplink_rate, std::size_t num_bs, double tx_factor,
                            double model_bits) {
  if (num_bs == 0) throw std::invalid_argument("model_broadcast_time: no BSs");
  if (twins == 0) return 0.0;
  if (!(uplink_rate > 0.0)) return std::numeric_limits<double>::infinity();
  const double payload = static_cast<double>(twins) * model_bits;
  if (num_bs == 1) return payload / uplink_rate;
  return tx_factor * std::log2(static_cast<double>(num_bs)) * payload / uplink_rate;
}

double block_broadcast_time(std::size_t num_producers, double block_bits, double downlink_rate, double tx_factor) {
  if (num_producers == 0) throw std::invalid_argument("empty producer set");
  if (num_producers == 1) return 0.0;
  if (!(downlink_rate > 0.0)) return std::numeric_limits<double>::infinity();
  return tx_factor * std::log2(static_cast<double>(num_producers)) * block_bits / downlink_rate;
}

double block_check_time(std::span<const std::size_t> producers, double block_bits, const NetworkModel& net) {
  if (producers.empty()) throw std::invalid_argument("empty producer set");
  double worst = 0.0;
  for (std::size_t p : producers) {
    check_bs(p, net);
    worst = std::max(worst, block_bits * net.cycles_per_validation_unit / net.validation_freq[p]);
  }
  return worst;
}

double block_validation_time(std::span<const std::size_t> producers, std::size_t producer, double block_bits,
                             std::span<const double> downlink_rates, const NetworkModel& net) {
  if (producers.empty()) throw std::invalid_argument("empty producer set");
  if (!(block_bits > 0.0)) throw std::domain_error("block size must be > 0");
  check_bs(producer, net);
  if (downlink_rates.size() != net.num_bs) throw std::invalid_argument("one downlink rate per BS expected");
  return block_broadcast_time(producers.size(), block_bits, downlink_rates[producer], net.tx_factor) +
         block_check_time(producers, block_bits, net);
}

LatencyBreakdown iteration_time(const SystemState& s, double theta_global) {
  if (s.net == nullptr) throw std::invalid_argument("iteration_time: no network");
  const NetworkModel& net = *s.net;
  if (s.assoc.num_bs() != net.num_bs) throw std::invalid_argument("association does not match the network");

  LatencyBreakdown out;
  out.per_bs_training.resize(net.num_bs);
  out.per_bs_agg.resize(net.num_bs);
  out.per_bs_tx.resize(net.num_bs);
  const auto counts = twin_counts(s.assoc);
  std::vector<double> downlink(net.num_bs);
  for (std::size_t i = 0; i < net.num_bs; ++i) {
    out.per_bs_training[i] = local_training_time(i, s.assoc, s.batch_fracs, net);
    out.per_bs_agg[i] = local_aggregation_time(i, s.assoc, net);
    const double up = counts[i] == 0 ? 0.0 : uplink_rate(i, s.channel, s.alloc, net, s.rate_mode);
    out.per_bs_tx[i] = model_broadcast_time(counts[i], up, net.num_bs, net.tx_factor, net.model_size_bits);
    downlink[i] = downlink_rate(i, s.channel, net, s.rate_mode);
  }
  out.t_local_training = *std::max_element(out.per_bs_training.begin(), out.per_bs_training.end());
  out.t_local_agg = *std::max_element(out.per_bs_agg.begin(), out.per_bs_agg.end());
  out.t_param_tx = *std::max_element(out.per_bs_tx.begin(), out.per_bs_tx.end());
  out.t_block_broadcast = block_broadcast_time(s.producers.size(), s.block_bits, downlink.at(s.producer), net.tx_factor);
  out.t_block_check = block_check_time(s.producers, s.block_bits, net);
  out.t_block_validation = out.t_block_broadcast + out.t_block_check;
  out.t_iteration = out.t_local_training + out.t_param_tx + out.t_block_broadcast + out.t_block_check;
  if (theta_global < 0.0 || theta_global >= 1.0) throw std::domain_error("theta_global must be in [0, 1)");
  out.objective = out.t_iteration / (1.0 - theta_global);
  return out;
}

std::size_t global_iteration_bound(double theta_global) {
  if (!(theta_global >= 0.0 && theta_global < 1.0)) throw std::domain_error("theta_global must be in [0, 1)");
  return ceil_tolerant(1.0 / (1.0 - theta_global));
}

double total_objective(double theta_global, double theta_threshold, double iteration_seconds) {
  if (!(theta_global < 1.0)) throw std::domain_error("theta_global must be < 1");
  if (theta_global < theta_threshold) throw std::domain_error("accuracy constraint violated: theta_G < theta_th");
  return iteration_seconds / (1.0 - theta_global);
}

std::size_t local_iterations(double theta_local, double log_base) {
  if (!(theta_local > 0.0 && theta_local <= 1.0)) throw std::domain_error("theta_local must be in (0, 1]");
  if (!(log_base > 1.0)) throw std::domain_error("log base must be > 1");
  return ceil_tolerant(std::log(1.0 / theta_local) / std::log(log_base));
}

}  // namespace dtfl
