#include "dtfl/channel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dtfl {

ChannelState make_channel(const NetworkModel& net, InterferenceModel model) {
  ChannelState ch;
  ch.num_bs = net.num_bs;
  ch.num_subchannels = net.num_subchannels;
  const std::size_t cells = net.num_bs * net.num_subchannels;
  ch.uplink_gain.assign(cells, 1.0);
  ch.downlink_gain.assign(cells, 1.0);
  ch.uplink_interferers.assign(cells, {});
  ch.downlink_interferers.assign(cells, {});
  for (std::size_t i = 0; i < net.num_bs; ++i) ch.distance.push_back(net.bs_distance(i));
  if (model == InterferenceModel::all) {
    for (std::size_t i = 0; i < net.num_bs; ++i)
      for (std::size_t c = 0; c < net.num_subchannels; ++c)
        for (std::size_t j = 0; j < net.num_bs; ++j)
          if (j != i) {
            ch.uplink_interferers[ch.index(i, c)].push_back(j);
            ch.downlink_interferers[ch.index(i, c)].push_back(j);
          }
  }
  return ch;
}

void redraw_gains(ChannelState& ch, Rng& rng) {
  std::exponential_distribution<double> rayleigh_power(1.0);
  for (double& h : ch.uplink_gain) h = rayleigh_power(rng);
  for (double& h : ch.downlink_gain) h = rayleigh_power(rng);
}

double BandwidthAllocation::share_of(std::size_t bs) const {
  double s = 0.0;
  for (std::size_t c = 0; c < num_subchannels; ++c) s += at(bs, c);
  return s;
}

double BandwidthAllocation::column_sum(std::size_t c) const {
  double s = 0.0;
  for (std::size_t i = 0; i < num_bs; ++i) s += at(i, c);
  return s;
}

bool BandwidthAllocation::feasible(double tol) const {
  if (tau.size() != num_bs * num_subchannels) return false;
  for (double t : tau)
    if (!(t >= 0.0 && t <= 1.0)) return false;
  for (std::size_t c = 0; c < num_subchannels; ++c)
    if (column_sum(c) > 1.0 + tol) return false;
  return true;
}

double path_loss(double r, double alpha) {
  if (!(r > 0.0)) throw std::domain_error("path_loss: distance must be > 0");
  return std::pow(r, -alpha);
}

namespace {

void check_dims(std::size_t bs, const ChannelState& ch, const NetworkModel& net) {
  if (ch.num_bs != net.num_bs || ch.num_subchannels != net.num_subchannels ||
      ch.uplink_gain.size() != net.num_bs * net.num_subchannels ||
      ch.downlink_gain.size() != ch.uplink_gain.size() || ch.distance.size() != net.num_bs)
    throw std::invalid_argument("channel state does not match the network");
  if (bs >= net.num_bs) throw std::out_of_range("unknown BS " + std::to_string(bs));
}

}  // namespace

double uplink_rate_on(std::size_t bs, std::size_t c, const ChannelState& ch, const BandwidthAllocation& alloc,
                      const NetworkModel& net, RateMode mode) {
  const double tau = alloc.at(bs, c);
  if (tau == 0.0) return 0.0;
  const double alpha = net.path_loss_exponent;
  const double own_loss = path_loss(ch.distance[bs], alpha);
  double interference = 0.0;
  for (std::size_t j : ch.uplink_interferers[ch.index(bs, c)]) {
    const double loss = mode == RateMode::literal ? own_loss : path_loss(ch.distance[j], alpha);
    interference += net.bs_tx_power * ch.up(j, c) * loss;
  }
  const double signal = net.bs_tx_power * ch.up(bs, c) * own_loss;
  return tau * net.uplink_bandwidth * std::log2(1.0 + signal / (interference + net.noise_power));
}

double uplink_rate(std::size_t bs, const ChannelState& ch, const BandwidthAllocation& alloc,
                   const NetworkModel& net, RateMode mode) {
  check_dims(bs, ch, net);
  if (alloc.num_bs != net.num_bs || alloc.num_subchannels != net.num_subchannels ||
      alloc.tau.size() != net.num_bs * net.num_subchannels)
    throw std::invalid_argument("bandwidth allocation does not match the network");
  double rate = 0.0;
  for (std::size_t c = 0; c < net.num_subchannels; ++c) rate += uplink_rate_on(bs, c, ch, alloc, net, mode);
  return rate;
}

double downlink_rate(std::size_t bs, const ChannelState& ch, const NetworkModel& net, RateMode mode) {
  check_dims(bs, ch, net);
  const double alpha = net.path_loss_exponent;
  const double own_loss = path_loss(ch.distance[bs], alpha);
  double rate = 0.0;
  for (std::size_t c = 0; c < net.num_subchannels; ++c) {
    double interference = 0.0;
    for (std::size_t j : ch.downlink_interferers[ch.index(bs, c)]) {
      const double loss = mode == RateMode::literal ? own_loss : path_loss(ch.distance[j], alpha);
      interference += net.mbs_tx_power * ch.down(j, c) * loss;
    }
    const double signal = net.mbs_tx_power * ch.down(bs, c) * (mode == RateMode::literal ? 1.0 : own_loss);
    rate += net.downlink_bandwidth * std::log2(1.0 + signal / (interference + net.noise_power));
  }
  return rate;
}

}  // namespace dtfl
