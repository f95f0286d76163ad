#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtfl/env.hpp"
#include "dtfl/maddpg.hpp"
#include "dtfl/network.hpp"

namespace dtfl::harness {

enum class PolicyKind { learned, random, average };
PolicyKind parse_policy_kind(const std::string& s);
const char* to_string(PolicyKind k);

struct ExperimentConfig {
  NetworkConfig network;
  env::EnvConfig env;
  maddpg::AgentConfig agent;
  std::size_t episodes = 500;
  std::size_t eval_episodes = 50;
  PolicyKind policy = PolicyKind::learned;
  std::vector<double> gamma_sweep;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  bool parallel = false;

  /// Throws ConfigError on an invalid field.
  void validate() const;
};

/// Unknown keys are errors. "network" may be an inline object or a path
/// (resolved against `base_dir`) to a network JSON file.
ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& c);
/// sha256 of the canonical JSON form, excluding output_dir.
Digest config_digest(const ExperimentConfig& c);

env::Environment make_environment(const ExperimentConfig& c);
maddpg::Maddpg make_agents(const ExperimentConfig& c, const env::Environment& e);

using Policy = std::function<env::JointAction(const env::Environment&, const env::EnvState&)>;

/// Every twin to a uniformly random BS, b ~ U[b_min, b_max], tau ~ U(0, 1]
/// before column normalization.
Policy random_policy(std::uint64_t seed);
/// Twin j to BS j mod M, b at the midpoint, tau = 1/M.
Policy average_policy();
/// Greedy actors.
Policy learned_policy(maddpg::Maddpg& agents);

/// Rolls out `episodes` episodes with env episode ids first, first+1, ...
std::vector<maddpg::EpisodeRecord> run_policy(env::Environment& e, const Policy& p, std::size_t episodes,
                                              std::uint64_t first_episode);

/// R_n = sum_{t<=n} sum_i R_{i,t} / (n M), where R_{i,t} is agent i's total
/// reward in episode t. Throws std::invalid_argument on an empty history.
std::vector<double> cumulative_average_reward(std::span<const std::vector<double>> per_agent_episode_rewards);
std::vector<double> cumulative_average_reward(std::span<const maddpg::EpisodeRecord> history);

/// Median per-step iteration time over every step of every episode.
double median_iteration_time(std::span<const maddpg::EpisodeRecord> history);

// Evaluation episodes use env episode ids from here on, shared by all policies.
inline constexpr std::uint64_t kEvalEpisodeBase = 1000000;

struct RunSummary {
  std::size_t episodes = 0;
  std::vector<maddpg::EpisodeRecord> history;
  std::vector<double> cumulative_cost;  // -R_n
  double median_learned = 0.0;
  double median_random = 0.0;
  double median_average = 0.0;
  bool evaluated = false;
};

/// Writes under `out_dir`:
///   metrics.csv        episode,mean_iteration_time,episode_reward,cumulative_avg_reward,global_loss,critic_loss,actor_objective
///   latency_rounds.csv episode,round,t_iteration
///   latency_episodes.csv episode,mean_t_iteration,median_t_iteration
///   loss_rounds.csv    episode,round,global_loss
///   cumulative_cost.csv episode,cumulative_avg_cost
///   timing.csv         episode,round,seconds   (wall clock; not reproducible)
/// and for learned runs also eval.csv (policy,episode,round,t_iteration),
/// model.ckpt and summary.txt.
RunSummary run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir, bool quiet = true);

/// Trains once per gamma with the shared seed into out_dir/gamma_<g>, then
/// writes sweep_cost.csv and sweep_timing.csv side by side.
std::vector<RunSummary> gamma_sweep(const ExperimentConfig& c, std::span<const double> gammas,
                                    const std::filesystem::path& out_dir, bool quiet = true);

/// Loads a checkpoint, evaluates it greedily and writes eval.csv and summary.txt.
RunSummary replay_checkpoint(const ExperimentConfig& c, const std::filesystem::path& checkpoint,
                             const std::filesystem::path& out_dir);

void write_metrics(std::ostream& out, std::span<const maddpg::EpisodeRecord> history);

}  // namespace dtfl::harness
