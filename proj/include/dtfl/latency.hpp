#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtfl/channel.hpp"
#include "dtfl/network.hpp"

namespace dtfl {

/// Per-round latency terms, in seconds.
///
/// t_iteration = t_local_training + t_param_tx + t_block_validation.
/// Local aggregation is reported but not summed; it is negligible next to
/// the other phases.
struct LatencyBreakdown {
  double t_local_training = 0.0;    // max_i T_i^cmp
  double t_local_agg = 0.0;         // max_i T_i^la
  double t_param_tx = 0.0;          // max_i T_i^pt
  double t_block_broadcast = 0.0;   // xi log2(M_p) S_B / R^D of the producer
  double t_block_check = 0.0;       // max over producers of S_B f^v / f^s
  double t_block_validation = 0.0;  // T_bp^bv = broadcast + check
  double t_iteration = 0.0;         // T
  double objective = 0.0;           // T / (1 - theta_G)

  std::vector<double> per_bs_training;
  std::vector<double> per_bs_agg;
  std::vector<double> per_bs_tx;

  /// T_i = T_i^cmp + T_i^pt + T_bp^bv, the per-agent cost.
  double agent_time(std::size_t bs) const {
    return per_bs_training.at(bs) + per_bs_tx.at(bs) + t_block_validation;
  }
};

struct AccuracyTargets {
  double theta_local = 0.5;
  double theta_global = 0.9;
  double theta_threshold = 0.8;
  double smoothness = 1.0;  // L

  /// Throws ConfigError if any value is outside (0, 1) or theta_G < theta_th.
  void validate() const;
};

/// T_i^cmp = (sum_j b_j D_j) f^C / f_i^C over twins associated with `bs`.
/// `batch_fracs` is indexed by twin.
double local_training_time(std::size_t bs, const Association& assoc, std::span<const double> batch_fracs,
                           const NetworkModel& net);

/// T_i^la = K_i |w_g| f_b^C / f_i^C.
double local_aggregation_time(std::size_t bs, const Association& assoc, const NetworkModel& net);

/// T_i^pt = xi log2(M) K_i |w_g| / R_i^U for M >= 2, K_i |w_g| / R_i^U for a
/// single BS. A zero rate with K_i > 0 yields +infinity.
double model_broadcast_time(std::size_t twins, double uplink_rate, std::size_t num_bs, double tx_factor,
                            double model_bits);

/// First term of T_bp^bv: xi log2(M_p) S_B / R^D.
double block_broadcast_time(std::size_t num_producers, double block_bits, double downlink_rate, double tx_factor);

/// Second term of T_bp^bv: max over producers of S_B f^v / f_i^s.
double block_check_time(std::span<const std::size_t> producers, double block_bits, const NetworkModel& net);

/// T_bp^bv for a block made by `producer`; `downlink_rates` is indexed by BS.
double block_validation_time(std::span<const std::size_t> producers, std::size_t producer, double block_bits,
                             std::span<const double> downlink_rates, const NetworkModel& net);

/// Everything iteration_time needs to evaluate one round.
struct SystemState {
  const NetworkModel* net = nullptr;
  Association assoc;
  std::vector<double> batch_fracs;  // per twin
  BandwidthAllocation alloc;
  ChannelState channel;
  std::vector<std::size_t> producers;
  std::size_t producer = 0;
  double block_bits = 0.0;
  RateMode rate_mode = RateMode::corrected;
};

LatencyBreakdown iteration_time(const SystemState& state, double theta_global = 0.0);

/// ceil(1 / (1 - theta_G)). Throws std::domain_error for theta_G outside [0, 1).
std::size_t global_iteration_bound(double theta_global);

/// T / (1 - theta_G). Throws std::domain_error if theta_G < theta_th or >= 1.
double total_objective(double theta_global, double theta_threshold, double iteration_seconds);

/// ceil(log_base(1 / theta_L)) local iterations per global round.
std::size_t local_iterations(double theta_local, double log_base = 2.718281828459045);

}  // namespace dtfl
