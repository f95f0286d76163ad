#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dtfl/common.hpp"
#include "dtfl/crypto.hpp"
#include "dtfl/dense_net.hpp"
#include "dtfl/env.hpp"

namespace dtfl::maddpg {

struct OUConfig {
  double theta = 0.15;
  double sigma = 0.2;
  double mu = 0.0;
  double dt = 1.0;
  double sigma_decay = 1.0;  // per-episode factor on sigma during training
  double sigma_min = 0.0;
};

/// x <- x + theta (mu - x) dt + sigma sqrt(dt) N(0, 1), per coordinate.
class OUNoise {
 public:
  OUNoise() = default;
  OUNoise(std::size_t dim, OUConfig cfg, std::uint64_t seed);
  const std::vector<double>& sample();
  void reset();  // x <- mu
  void set_sigma(double sigma);
  const std::vector<double>& state() const { return x_; }
  const OUConfig& config() const { return cfg_; }

 private:
  OUConfig cfg_;
  std::vector<double> x_;
  Rng rng_;
};

struct Transition {
  std::vector<double> state;
  std::vector<double> joint_action;  // actor space, agents concatenated
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

/// Fixed-capacity ring buffer; oldest entries are overwritten.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity = 100000);
  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }
  /// `n` distinct indices, uniform over the stored entries. Throws
  /// std::invalid_argument if n > size().
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

struct Batch {
  Matrix state;
  Matrix joint_action;
  Matrix next_state;
  std::vector<double> reward;
  std::vector<double> done;  // 1.0 for terminal
  std::size_t size() const { return reward.size(); }
};

Batch make_batch(const ReplayMemory& memory, std::span<const std::size_t> indices);

struct AgentConfig {
  std::vector<std::size_t> hidden{128, 128};
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double actor_reg = 1e-3;  // weight of mean squared actor pre-activation; keeps tanh outputs off the rails
  double tau = 0.01;  // soft-update rate beta
  double gamma = 0.9;
  double reward_scale = 1.0;  // applied to rewards as they enter replay; Q is learned in scaled units
  double target_noise = 0.0;  // std of clipped Gaussian noise on target actions; 0 disables smoothing
  double target_noise_clip = 0.5;
  std::size_t policy_delay = 1;  // critic steps per actor step and target update
  std::size_t updates_per_step = 1;  // replay updates after each environment step
  bool mask_unassigned = false;      // hide batch fractions of twins an agent does not own from the critics
  std::size_t replay_capacity = 100000;
  std::size_t batch_size = 64;
  std::size_t warmup = 0;  // transitions stored before updates start; 0 means batch_size
  OUConfig ou;
  OptimizerConfig optimizer{OptimizerKind::sgd};

  /// Throws ConfigError on an out-of-range field.
  void validate() const;
};

/// Fills `mask` (same shape as `joint`) with 1 for joint-action entries that
/// reach the environment and 0 for those that are ignored. Critics see
/// joint * mask, and actor gradients are multiplied by the same mask.
using ActionMask = std::function<void(const Matrix& joint, Matrix& mask)>;

/// Mask for the env actor layout (scores | batch fracs | shares): agent i's
/// batch fraction for twin j counts only when twin j goes to BS i under the
/// argmax association, ties to the lower id.
ActionMask assignment_mask(std::size_t num_agents, std::size_t num_twins, std::size_t action_dim);

struct Agent {
  std::size_t id = 0;
  DenseNet actor, critic, actor_target, critic_target;
  Optimizer actor_opt, critic_opt;
  ReplayMemory memory;
  OUNoise noise;
  Rng rng;
};

/// M cooperating agents. Actor i maps the encoded state to its own action
/// block; critic i scores the state together with the joint action.
class Maddpg {
 public:
  Maddpg(std::size_t num_agents, std::size_t state_dim, std::size_t action_dim, AgentConfig cfg, std::uint64_t seed);

  std::size_t num_agents() const { return agents_.size(); }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const AgentConfig& config() const { return cfg_; }
  /// Used by update() when the config enables masking.
  void set_action_mask(ActionMask mask) { mask_ = std::move(mask); }
  std::vector<Agent>& agents() { return agents_; }
  const std::vector<Agent>& agents() const { return agents_; }

  /// pi_i(s) (+ OU sample when exploring), clipped to [-1, 1]. Throws
  /// DivergenceError if the actor output is not finite.
  std::vector<double> select_action(std::size_t agent, std::span<const double> state, bool explore);
  void reset_noise();
  /// sigma * sigma_decay^episode, floored at sigma_min, for every agent.
  void schedule_noise(std::size_t episode);

  /// One transition per agent, each carrying that agent's reward.
  void store(std::span<const double> state, std::span<const double> joint_action, std::span<const double> rewards,
             std::span<const double> next_state, bool done);

  struct UpdateStats {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
    bool updated = false;
    bool actor_updated = false;
  };
  /// Critic step for every agent; every policy_delay-th call also the actor
  /// steps and the soft target updates.
  /// Agents run concurrently under Exec::parallel with identical results.
  UpdateStats update(Exec exec = Exec::serial);

  /// Layout: "DTCK", u32 version, 32-byte config digest, u32 agents, u64 state
  /// dim, u64 action dim, then per agent actor, critic, actor target, critic target.
  void save(const std::filesystem::path& path, const Digest& config_digest) const;
  /// Throws std::runtime_error on a bad file or a digest/shape mismatch.
  void load(const std::filesystem::path& path, const Digest* expected_digest = nullptr);

 private:
  std::size_t state_dim_;
  std::size_t action_dim_;
  AgentConfig cfg_;
  std::vector<Agent> agents_;
  std::size_t updates_ = 0;
  ActionMask mask_;
};

/// y = r + gamma (1 - done) Q_i^T(s', pi_1^T(s'), ..., pi_M^T(s')). With
/// noise_sigma > 0 each target action gets clip(N(0, sigma^2), -clip, clip)
/// drawn from `rng` and is clamped back to [-1, 1].
std::vector<double> critic_target(std::span<const Agent> agents, std::size_t i, const Batch& batch, double gamma,
                                  Exec exec = Exec::serial, double noise_sigma = 0.0, double noise_clip = 0.5,
                                  Rng* rng = nullptr, const ActionMask& mask = {});

/// One step on mean (Q_i(s, a) - y)^2; returns the pre-step value. Throws DivergenceError on a non-finite loss.
double update_critic(Agent& agent, const Batch& batch, std::span<const double> targets, double lr,
                     Exec exec = Exec::serial, const ActionMask& mask = {});

/// One descent step on -mean Q_i(s, a) + reg * mean(z^2), with agent i's block
/// replaced by pi_i(s) and z the actor's output pre-activation; returns the
/// pre-step mean Q.
double update_actor(Agent& agent, std::size_t action_offset, const Batch& batch, double lr, Exec exec = Exec::serial,
                    double reg = 0.0, const ActionMask& mask = {});

/// theta^T <- beta theta + (1 - beta) theta^T for actor and critic. Throws
/// std::domain_error for beta outside (0, 1].
void soft_update(Agent& agent, double beta);

struct EpisodeRecord {
  std::size_t episode = 0;
  std::vector<std::vector<double>> rewards;  // [step][agent]
  std::vector<double> t_iteration;           // per step
  std::vector<double> global_loss;           // per step
  std::vector<double> step_seconds;          // wall clock per step
  double critic_loss = 0.0;                  // mean over update steps
  double actor_objective = 0.0;

  double total_reward() const;  // sum over steps and agents
};

struct TrainOptions {
  std::size_t episodes = 0;
  std::size_t first_episode = 0;  // environment episode seed offset
  Exec exec = Exec::serial;
  std::function<void(const EpisodeRecord&)> on_episode;
};

/// Interleaved joint training: every step all agents act, the env advances,
/// the transition is stored, then every agent updates updates_per_step times.
std::vector<EpisodeRecord> train(env::Environment& env, Maddpg& agents, const TrainOptions& opts);

/// Greedy rollout of one episode.
EpisodeRecord evaluate(env::Environment& env, Maddpg& agents, std::uint64_t episode);

/// Runs all actors on the encoded state and maps the outputs to env units.
env::JointAction act(const env::Environment& env, Maddpg& agents, const env::EnvState& s, bool explore,
                     std::vector<double>* actor_space = nullptr);

}  // namespace dtfl::maddpg
