#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "dtfl/channel.hpp"
#include "dtfl/fl.hpp"
#include "dtfl/latency.hpp"
#include "dtfl/ledger.hpp"
#include "dtfl/network.hpp"

namespace dtfl::env {

enum class RewardMode { shared, per_agent };

struct FlTaskConfig {
  fl::ModelShape shape;
  double learning_rate = 0.5;
  double l2 = 0.0;
  double separation = 2.0;  // distance between class centres
  std::size_t holdout_size = 200;
  fl::AggMode agg_mode = fl::AggMode::normalized;
};

struct EnvConfig {
  std::size_t horizon = 20;
  double b_min = 0.1;
  double b_max = 1.0;
  double tau_floor = 0.01;  // lowest pre-normalization share an actor can request
  RewardMode reward_mode = RewardMode::shared;
  bool constant_channel = false;
  InterferenceModel interference = InterferenceModel::none;
  RateMode rate_mode = RateMode::corrected;
  AccuracyTargets accuracy;
  FlTaskConfig fl;
  ledger::LedgerConfig ledger;
  std::uint64_t seed = 7;
  Exec exec = Exec::serial;

  /// Throws ConfigError on an out-of-range field.
  void validate() const;
};

/// s(t) = (f^C, K, D, h).
struct EnvState {
  std::vector<double> cpu_freq;       // per BS, Hz
  std::vector<double> twin_counts;    // K, per BS
  std::vector<double> data_sizes;     // D, per twin
  std::vector<double> channel_gains;  // uplink h, BS x subchannel
};

/// Raw per-agent decision in environment units.
struct AgentAction {
  std::vector<double> assoc_scores;      // per twin
  std::vector<double> batch_fracs;       // per twin; used for the twins this BS wins
  std::vector<double> bandwidth_shares;  // per subchannel
};

using JointAction = std::vector<AgentAction>;

/// What a feasible joint action means for the system.
struct Decision {
  Association assoc;
  std::vector<double> batch_fracs;  // per twin
  BandwidthAllocation alloc;
};

struct Bounds {
  std::size_t num_bs = 0;
  std::size_t num_twins = 0;
  std::size_t num_subchannels = 0;
  double b_min = 0.1;
  double b_max = 1.0;
};

/// Argmax association (ties to the lower BS id, scores become one-hot),
/// b clamped to [b_min, b_max], each tau column scaled to sum to one
/// (negative entries count as zero; an all-zero column becomes uniform).
/// Throws std::invalid_argument on NaN or a shape mismatch.
JointAction project_action(const JointAction& raw, const Bounds& bounds);

/// Reads a projected joint action.
Decision decode(const JointAction& feasible, const Bounds& bounds);

/// Complete association, b within bounds and tau columns summing to at most
/// 1 + tol.
bool feasible(const Decision& d, const Bounds& bounds, double tol = 1e-9);

/// Shared: -T for every agent. Per-agent: -T_i.
std::vector<double> reward(const LatencyBreakdown& breakdown, std::size_t num_agents, RewardMode mode);

/// sum_t gamma^t r_t. Throws std::domain_error for gamma outside [0, 1].
double discounted_return(std::span<const double> rewards, double gamma);

struct StepOutcome {
  EnvState next_state;
  std::vector<double> rewards;
  LatencyBreakdown breakdown;
  bool done = false;

  SystemState applied;  // the state the latency was evaluated on
  double global_loss = 0.0;
  bool block_accepted = false;
  std::size_t models_aggregated = 0;
  std::size_t invalid_txs = 0;
};

class Environment {
 public:
  /// Builds twins, their datasets, the holdout set and the channel.
  Environment(NetworkModel net, EnvConfig cfg);

  /// Fresh global model, ledger, round-robin association and channel draw.
  EnvState reset(std::uint64_t episode);
  EnvState observe() const;
  StepOutcome step(const JointAction& action);

  std::size_t num_agents() const { return net_.num_bs; }
  std::size_t num_twins() const { return twins_.size(); }
  std::size_t state_dim() const;
  std::size_t action_dim() const;  // per agent: scores | b | tau
  Bounds bounds() const;

  /// Scaled flat observation fed to the networks.
  std::vector<double> encode(const EnvState& s) const;
  /// Maps an actor output in [-1, 1]^action_dim() to raw environment units.
  AgentAction from_actor(std::span<const double> x) const;

  const NetworkModel& network() const { return net_; }
  const EnvConfig& config() const { return cfg_; }
  const ledger::Ledger& ledger() const { return ledger_; }
  const std::vector<DigitalTwin>& twins() const { return twins_; }
  const Association& association() const { return assoc_; }
  const ModelParams& global_model() const { return global_; }
  const ChannelState& channel() const { return channel_; }
  std::size_t steps_taken() const { return step_; }
  double sim_time() const { return clock_; }
  double initial_loss() const { return initial_loss_; }

  /// Called with the mempool right before each block is produced.
  void set_fault_injector(std::function<void(ledger::Mempool&)> fn) { inject_ = std::move(fn); }
  /// One delimited row per step: state, action, reward, breakdown.
  void set_trajectory_sink(std::ostream* out);

 private:
  void write_trajectory_row(const EnvState& s, const Decision& d, const StepOutcome& o);

  NetworkModel net_;
  EnvConfig cfg_;
  std::vector<DigitalTwin> twins_;
  Dataset holdout_;
  fl::TrainingTask task_;
  ChannelState channel_;
  Association assoc_;
  ModelParams global_;
  ledger::Ledger ledger_;
  Rng rng_;
  std::uint64_t episode_ = 0;
  std::size_t step_ = 0;
  double clock_ = 0.0;
  double initial_loss_ = 0.0;
  std::function<void(ledger::Mempool&)> inject_;
  std::ostream* trajectory_ = nullptr;
};

}  // namespace dtfl::env
