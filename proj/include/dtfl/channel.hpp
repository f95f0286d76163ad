#pragma once

#include <cstddef>
#include <vector>

#include "dtfl/common.hpp"
#include "dtfl/network.hpp"

namespace dtfl {

/// How the SINR expressions treat path loss.
///  - corrected: every transmitter is attenuated by its own distance to the
///    MBS, in the signal and in the interference terms.
///  - literal: uplink interference reuses the victim's distance, and the
///    downlink signal term carries no path loss at all.
enum class RateMode { corrected, literal };

/// Which BSs interfere with BS i on subchannel c when the state is built
/// from a network: nobody (orthogonal time shares) or every other BS.
enum class InterferenceModel { none, all };

struct ChannelState {
  std::size_t num_bs = 0;
  std::size_t num_subchannels = 0;
  std::vector<double> uplink_gain;    // h^U, index bs * C + c
  std::vector<double> downlink_gain;  // h^D, index bs * C + c
  std::vector<double> distance;       // r_{i,m}, per BS
  std::vector<std::vector<std::size_t>> uplink_interferers;    // N', index bs * C + c
  std::vector<std::vector<std::size_t>> downlink_interferers;  // N'', index bs * C + c

  std::size_t index(std::size_t bs, std::size_t c) const { return bs * num_subchannels + c; }
  double up(std::size_t bs, std::size_t c) const { return uplink_gain[index(bs, c)]; }
  double down(std::size_t bs, std::size_t c) const { return downlink_gain[index(bs, c)]; }
};

/// Unit gains, distances from the topology, interference sets per `model`.
ChannelState make_channel(const NetworkModel& net, InterferenceModel model = InterferenceModel::none);

/// Block fading: redraws every gain i.i.d. from Exp(1).
void redraw_gains(ChannelState& ch, Rng& rng);

/// Time-share matrix tau (BS x subchannel).
struct BandwidthAllocation {
  std::size_t num_bs = 0;
  std::size_t num_subchannels = 0;
  std::vector<double> tau;

  BandwidthAllocation() = default;
  BandwidthAllocation(std::size_t m, std::size_t c, double fill = 0.0) : num_bs(m), num_subchannels(c), tau(m * c, fill) {}

  static BandwidthAllocation uniform(std::size_t m, std::size_t c) {
    return BandwidthAllocation(m, c, 1.0 / static_cast<double>(m));
  }

  double& at(std::size_t bs, std::size_t c) { return tau[bs * num_subchannels + c]; }
  double at(std::size_t bs, std::size_t c) const { return tau[bs * num_subchannels + c]; }
  double share_of(std::size_t bs) const;
  double column_sum(std::size_t c) const;

  /// Every entry in [0, 1] and every column sums to at most 1 + tol.
  bool feasible(double tol = 1e-9) const;
};

/// r^-alpha. Throws std::domain_error for r <= 0.
double path_loss(double r, double alpha);

/// Single-subchannel uplink rate of `bs` on `c` (already weighted by tau).
double uplink_rate_on(std::size_t bs, std::size_t c, const ChannelState& ch, const BandwidthAllocation& alloc,
                      const NetworkModel& net, RateMode mode = RateMode::corrected);

/// R_i^U summed over subchannels.
double uplink_rate(std::size_t bs, const ChannelState& ch, const BandwidthAllocation& alloc,
                   const NetworkModel& net, RateMode mode = RateMode::corrected);

/// R_i^D summed over subchannels; no time-share factor.
double downlink_rate(std::size_t bs, const ChannelState& ch, const NetworkModel& net,
                     RateMode mode = RateMode::corrected);

}  // namespace dtfl
