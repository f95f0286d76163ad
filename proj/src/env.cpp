#include "dtfl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dtfl/crypto.hpp"

namespace dtfl::env {

namespace {

constexpr std::uint64_t kDigestBits = 256;

void check_shapes(const JointAction& a, const Bounds& b) {
  if (a.size() != b.num_bs) throw std::invalid_argument("joint action: expected one action per BS");
  for (const auto& x : a) {
    if (x.assoc_scores.size() != b.num_twins || x.batch_fracs.size() != b.num_twins ||
        x.bandwidth_shares.size() != b.num_subchannels)
      throw std::invalid_argument("joint action: component size mismatch");
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void EnvConfig::validate() const {
  if (horizon == 0) throw ConfigError("horizon must be >= 1");
  if (!(b_min > 0.0 && b_min <= b_max && b_max <= 1.0)) throw ConfigError("need 0 < b_min <= b_max <= 1");
  if (!(tau_floor >= 0.0 && tau_floor < 1.0)) throw ConfigError("tau_floor must be in [0, 1)");
  if (!(fl.learning_rate > 0.0)) throw ConfigError("fl learning_rate must be > 0");
  if (fl.l2 < 0.0) throw ConfigError("fl l2 must be >= 0");
  if (fl.holdout_size == 0) throw ConfigError("fl holdout_size must be >= 1");
  if (fl.shape.features == 0 || fl.shape.classes < 2) throw ConfigError("fl shape needs features >= 1, classes >= 2");
  if (!(ledger.quorum >= 0.0 && ledger.quorum < 1.0)) throw ConfigError("ledger quorum must be in [0, 1)");
  if (ledger.interval_multiplier == 0) throw ConfigError("ledger interval_multiplier must be >= 1");
  if (!(ledger.stake_pool > 0.0)) throw ConfigError("ledger stake_pool must be > 0");
  if (!(accuracy.theta_local > 0.0 && accuracy.theta_local <= 1.0)) throw ConfigError("theta_local must be in (0, 1]");
  if (!(accuracy.theta_global >= 0.0 && accuracy.theta_global < 1.0)) throw ConfigError("theta_global must be in [0, 1)");
  if (accuracy.theta_global < accuracy.theta_threshold) throw ConfigError("theta_global must be >= theta_threshold");
}

JointAction project_action(const JointAction& raw, const Bounds& b) {
  check_shapes(raw, b);
  for (const auto& a : raw)
    if (!all_finite(a.assoc_scores) || !all_finite(a.batch_fracs) || !all_finite(a.bandwidth_shares))
      throw std::invalid_argument("joint action contains a non-finite value");

  JointAction out(b.num_bs);
  for (std::size_t i = 0; i < b.num_bs; ++i) {
    out[i].assoc_scores.assign(b.num_twins, 0.0);
    out[i].batch_fracs.resize(b.num_twins);
    for (std::size_t j = 0; j < b.num_twins; ++j)
      out[i].batch_fracs[j] = std::clamp(raw[i].batch_fracs[j], b.b_min, b.b_max);
    out[i].bandwidth_shares.resize(b.num_subchannels);
  }
  for (std::size_t j = 0; j < b.num_twins; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < b.num_bs; ++i)
      if (raw[i].assoc_scores[j] > raw[best].assoc_scores[j]) best = i;
    out[best].assoc_scores[j] = 1.0;
  }
  for (std::size_t c = 0; c < b.num_subchannels; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < b.num_bs; ++i) sum += std::max(raw[i].bandwidth_shares[c], 0.0);
    for (std::size_t i = 0; i < b.num_bs; ++i)
      out[i].bandwidth_shares[c] = sum > 0.0 ? std::max(raw[i].bandwidth_shares[c], 0.0) / sum
                                             : 1.0 / static_cast<double>(b.num_bs);
  }
  return out;
}

Decision decode(const JointAction& a, const Bounds& b) {
  check_shapes(a, b);
  Decision d;
  d.assoc = Association(std::vector<double>(b.num_twins, 1.0), b.num_bs);
  d.batch_fracs.assign(b.num_twins, b.b_min);
  for (std::size_t j = 0; j < b.num_twins; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < b.num_bs; ++i)
      if (a[i].assoc_scores[j] > a[best].assoc_scores[j]) best = i;
    d.assoc.assign(j, best);
    d.batch_fracs[j] = a[best].batch_fracs[j];
  }
  d.alloc = BandwidthAllocation(b.num_bs, b.num_subchannels);
  for (std::size_t i = 0; i < b.num_bs; ++i)
    for (std::size_t c = 0; c < b.num_subchannels; ++c) d.alloc.at(i, c) = a[i].bandwidth_shares[c];
  return d;
}

bool feasible(const Decision& d, const Bounds& b, double tol) {
  if (d.assoc.num_twins() != b.num_twins || d.assoc.num_bs() != b.num_bs || !d.assoc.complete()) return false;
  if (d.batch_fracs.size() != b.num_twins) return false;
  for (double x : d.batch_fracs)
    if (!(x >= b.b_min && x <= b.b_max)) return false;
  if (d.alloc.num_bs != b.num_bs || d.alloc.num_subchannels != b.num_subchannels) return false;
  return d.alloc.feasible(tol);
}

std::vector<double> reward(const LatencyBreakdown& breakdown, std::size_t num_agents, RewardMode mode) {
  std::vector<double> r(num_agents, -breakdown.t_iteration);
  if (mode == RewardMode::per_agent)
    for (std::size_t i = 0; i < num_agents; ++i) r[i] = -breakdown.agent_time(i);
  return r;
}

double discounted_return(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::domain_error("gamma must be in [0, 1]");
  double total = 0.0, w = 1.0;
  for (double r : rewards) {
    total += w * r;
    w *= gamma;
  }
  return total;
}

Environment::Environment(NetworkModel net, EnvConfig cfg) : net_(std::move(net)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.fl.shape.kind == fl::ModelKind::dense && cfg_.fl.shape.hidden == 0)
    throw ConfigError("dense FL model needs hidden >= 1");

  Rng data_rng = make_rng(cfg_.seed, 1);
  std::vector<std::size_t> sizes(net_.num_users);
  std::size_t total = 0;
  for (std::size_t u = 0; u < net_.num_users; ++u) {
    sizes[u] = static_cast<std::size_t>(net_.user_data_sizes[u]);
    total += sizes[u];
  }
  const auto& shape = cfg_.fl.shape;
  const Dataset pool =
      make_gaussian_clusters(total + cfg_.fl.holdout_size, shape.features, shape.classes, cfg_.fl.separation, data_rng);
  sizes.push_back(cfg_.fl.holdout_size);
  auto parts = partition_iid(pool, sizes, data_rng);
  holdout_ = std::move(parts.back());
  parts.pop_back();

  twins_.resize(net_.num_users);
  for (std::size_t u = 0; u < net_.num_users; ++u) {
    twins_[u].id = u;
    twins_[u].owner_user = u;
    twins_[u].data = std::move(parts[u]);
  }

  task_.shape = shape;
  task_.learning_rate = cfg_.fl.learning_rate;
  task_.l2 = cfg_.fl.l2;
  task_.local_iters = local_iterations(cfg_.accuracy.theta_local);

  channel_ = make_channel(net_, cfg_.interference);
  reset(0);
}

std::size_t Environment::state_dim() const { return 2 * net_.num_bs + twins_.size() + net_.num_bs * net_.num_subchannels; }

std::size_t Environment::action_dim() const { return 2 * twins_.size() + net_.num_subchannels; }

Bounds Environment::bounds() const {
  return Bounds{net_.num_bs, twins_.size(), net_.num_subchannels, cfg_.b_min, cfg_.b_max};
}

EnvState Environment::reset(std::uint64_t episode) {
  episode_ = episode;
  step_ = 0;
  clock_ = 0.0;
  rng_ = make_rng(cfg_.seed, derive_seed(2, episode));
  task_.seed = derive_seed(cfg_.seed, derive_seed(3, episode));

  Rng init_rng = make_rng(task_.seed, 0);
  global_ = fl::init_params(task_.shape, init_rng);
  for (auto& t : twins_) {
    t.behavior_model = global_;
    t.state = DynamicState{};
  }
  initial_loss_ = fl::global_loss(task_.shape, global_, twins_, task_.l2);

  std::vector<double> sizes(twins_.size());
  for (std::size_t j = 0; j < twins_.size(); ++j) sizes[j] = twins_[j].data_size();
  assoc_ = Association::round_robin(sizes, net_.num_bs);

  ledger_ = ledger::Ledger(net_.num_bs, net_.num_producers, net_.block_header_bits, derive_seed(cfg_.seed, 4),
                           cfg_.ledger);
  ledger_.genesis(assoc_);
  for (std::size_t j = 0; j < twins_.size(); ++j) {
    ByteWriter w;
    w.u64(j);
    for (double v : twins_[j].behavior_model.w) w.f64(v);
    const Digest d = sha256(w.take());
    const auto author = static_cast<std::uint32_t>(*assoc_.bs_of(j));
    ledger_.submit(ledger_.sign(ledger::RecordKind::twin_model, author, 0.0, {d.begin(), d.end()}, kDigestBits));
  }

  if (cfg_.constant_channel) {
    std::fill(channel_.uplink_gain.begin(), channel_.uplink_gain.end(), 1.0);
    std::fill(channel_.downlink_gain.begin(), channel_.downlink_gain.end(), 1.0);
  } else {
    redraw_gains(channel_, rng_);
  }
  return observe();
}

EnvState Environment::observe() const {
  EnvState s;
  s.cpu_freq = net_.bs_cpu_freq;
  const auto counts = twin_counts(assoc_);
  s.twin_counts.assign(counts.begin(), counts.end());
  s.data_sizes.resize(twins_.size());
  for (std::size_t j = 0; j < twins_.size(); ++j) s.data_sizes[j] = twins_[j].data_size();
  s.channel_gains = channel_.uplink_gain;
  return s;
}

std::vector<double> Environment::encode(const EnvState& s) const {
  const double f_max = *std::max_element(net_.bs_cpu_freq.begin(), net_.bs_cpu_freq.end());
  const double d_max = std::max(1.0, *std::max_element(s.data_sizes.begin(), s.data_sizes.end()));
  const double n = static_cast<double>(twins_.size());
  std::vector<double> x;
  x.reserve(state_dim());
  for (double f : s.cpu_freq) x.push_back(f / f_max);
  for (double k : s.twin_counts) x.push_back(k / n);
  for (double d : s.data_sizes) x.push_back(d / d_max);
  for (double h : s.channel_gains) x.push_back(h);
  return x;
}

AgentAction Environment::from_actor(std::span<const double> x) const {
  if (x.size() != action_dim()) throw std::invalid_argument("actor output has the wrong size");
  const std::size_t n = twins_.size();
  AgentAction a;
  a.assoc_scores.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  a.batch_fracs.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    a.batch_fracs[j] = cfg_.b_min + 0.5 * (x[n + j] + 1.0) * (cfg_.b_max - cfg_.b_min);
  a.bandwidth_shares.resize(net_.num_subchannels);
  for (std::size_t c = 0; c < net_.num_subchannels; ++c)
    a.bandwidth_shares[c] = cfg_.tau_floor + (1.0 - cfg_.tau_floor) * 0.5 * (x[2 * n + c] + 1.0);
  return a;
}

void Environment::set_trajectory_sink(std::ostream* out) {
  trajectory_ = out;
  if (trajectory_ == nullptr) return;
  *trajectory_ << "episode,step";
  for (std::size_t i = 0; i < net_.num_bs; ++i) *trajectory_ << ",K" << i;
  for (std::size_t j = 0; j < twins_.size(); ++j) *trajectory_ << ",bs" << j;
  for (std::size_t j = 0; j < twins_.size(); ++j) *trajectory_ << ",b" << j;
  for (std::size_t i = 0; i < net_.num_bs; ++i)
    for (std::size_t c = 0; c < net_.num_subchannels; ++c) *trajectory_ << ",tau" << i << '_' << c;
  *trajectory_ << ",reward,t_local_training,t_local_agg,t_param_tx,t_block_broadcast,t_block_check,t_iteration,"
                  "global_loss\n";
}

void Environment::write_trajectory_row(const EnvState& s, const Decision& d, const StepOutcome& o) {
  auto& out = *trajectory_;
  out << episode_ << ',' << step_;
  for (double k : s.twin_counts) out << ',' << k;
  for (std::size_t j = 0; j < twins_.size(); ++j) out << ',' << *d.assoc.bs_of(j);
  for (double b : d.batch_fracs) out << ',' << b;
  for (double t : d.alloc.tau) out << ',' << t;
  const auto& b = o.breakdown;
  out << ',' << o.rewards.front() << ',' << b.t_local_training << ',' << b.t_local_agg << ',' << b.t_param_tx << ','
      << b.t_block_broadcast << ',' << b.t_block_check << ',' << b.t_iteration << ',' << o.global_loss << '\n';
}

StepOutcome Environment::step(const JointAction& action) {
  const Bounds bnd = bounds();
  const JointAction projected = project_action(action, bnd);
  Decision d = decode(projected, bnd);
  {
    std::vector<double> sizes(twins_.size());
    for (std::size_t j = 0; j < twins_.size(); ++j) sizes[j] = twins_[j].data_size();
    Association a(sizes, net_.num_bs);
    for (std::size_t j = 0; j < twins_.size(); ++j) a.assign(j, *d.assoc.bs_of(j));
    d.assoc = std::move(a);
  }
  assoc_ = d.assoc;
  const EnvState before = observe();

  // Local training and BS-level aggregation.
  const auto local = fl::train_twins(twins_, assoc_, d.batch_fracs, global_, task_, step_, cfg_.exec);
  for (std::size_t j = 0; j < twins_.size(); ++j) twins_[j].behavior_model = local[j].params;
  const auto bs_models = fl::aggregate_by_bs(local, twins_, assoc_, cfg_.fl.agg_mode);

  double t_cmp = 0.0;
  for (std::size_t i = 0; i < net_.num_bs; ++i)
    t_cmp = std::max(t_cmp, local_training_time(i, assoc_, d.batch_fracs, net_));
  const double interval =
      ledger::block_interval_policy(std::max(t_cmp, 1e-9), cfg_.ledger.interval_multiplier);

  // Records for this slot: one training model per active BS, one state/action
  // digest per agent.
  for (std::size_t i = 0; i < net_.num_bs; ++i) {
    if (bs_models[i].data_size <= 0.0) continue;
    ledger_.submit(ledger_.sign(ledger::RecordKind::training_model, static_cast<std::uint32_t>(i), clock_,
                                fl::serialize_model(bs_models[i]),
                                static_cast<std::uint64_t>(net_.model_size_bits)));
  }
  for (std::size_t i = 0; i < net_.num_bs; ++i) {
    ByteWriter w;
    w.u64(step_);
    for (double v : before.channel_gains) w.f64(v);
    for (double v : before.twin_counts) w.f64(v);
    for (double v : projected[i].assoc_scores) w.f64(v);
    for (double v : projected[i].batch_fracs) w.f64(v);
    for (double v : projected[i].bandwidth_shares) w.f64(v);
    const Digest dg = sha256(w.take());
    ledger_.submit(ledger_.sign(ledger::RecordKind::twin_data, static_cast<std::uint32_t>(i), clock_,
                                {dg.begin(), dg.end()}, kDigestBits));
  }
  if (inject_) inject_(ledger_.mempool());

  ledger::ModelVerifier verifier{&holdout_, task_.shape, global_, cfg_.ledger.verification_threshold, task_.l2};
  const auto report = ledger_.run_slot(step_, clock_, interval, &verifier);

  StepOutcome out;
  out.block_accepted = report.outcome.accepted;
  std::vector<fl::WeightedModel> verified;
  for (std::size_t k = 0; k < report.block.txs.size(); ++k) {
    const auto& tx = report.block.txs[k];
    if (!report.outcome.tx_valid[k]) {
      ++out.invalid_txs;
      continue;
    }
    if (out.block_accepted && tx.kind == ledger::RecordKind::training_model)
      verified.push_back(fl::deserialize_model(tx.payload));
  }
  out.models_aggregated = verified.size();
  if (!verified.empty()) global_ = fl::global_aggregate(verified, cfg_.fl.agg_mode);
  out.global_loss = fl::global_loss(task_.shape, global_, twins_, task_.l2);

  out.applied.net = &net_;
  out.applied.assoc = assoc_;
  out.applied.batch_fracs = d.batch_fracs;
  out.applied.alloc = d.alloc;
  out.applied.channel = channel_;
  out.applied.producers = ledger_.schedule().producers;
  out.applied.producer = report.block.producer;
  out.applied.block_bits = report.block.bits();
  out.applied.rate_mode = cfg_.rate_mode;
  out.breakdown = iteration_time(out.applied, cfg_.accuracy.theta_global);
  out.rewards = reward(out.breakdown, net_.num_bs, cfg_.reward_mode);

  clock_ += out.breakdown.t_iteration;
  if (trajectory_ != nullptr) write_trajectory_row(before, d, out);
  ++step_;
  out.done = step_ >= cfg_.horizon;
  if (!cfg_.constant_channel) redraw_gains(channel_, rng_);
  out.next_state = observe();
  return out;
}

}  // namespace dtfl::env
