#include "dtfl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dtfl::harness {

using nlohmann::json;

PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "learned") return PolicyKind::learned;
  if (s == "random") return PolicyKind::random;
  if (s == "average") return PolicyKind::average;
  throw ConfigError("unknown policy '" + s + "' (expected learned, random or average)");
}

const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::learned: return "learned";
    case PolicyKind::random: return "random";
    case PolicyKind::average: return "average";
  }
  return "?";
}

namespace {

// Reads known keys from one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string name, std::set<std::string> keys) : j_(j), name_(std::move(name)) {
    if (!j.is_object()) throw ConfigError(name_ + ": expected an object");
    for (const auto& [key, _] : j.items())
      if (!keys.contains(key)) throw ConfigError(name_ + ": unknown key '" + key + "'");
  }

  template <typename T>
  void read(const char* key, T& out) const {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  template <typename E>
  void read_enum(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> names) const {
    std::string s;
    read(key, s);
    if (s.empty()) return;
    for (const auto& [n, v] : names)
      if (s == n) {
        out = v;
        return;
      }
    throw ConfigError(name_ + "." + key + ": unknown value '" + s + "'");
  }

  const json* child(const char* key) const {
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const json& j_;
  std::string name_;
};

void parse_fl(const json& j, env::FlTaskConfig& fl) {
  Section s(j, "fl", {"model", "features", "classes", "hidden", "learning_rate", "l2", "separation", "holdout_size",
                      "aggregation"});
  s.read_enum("model", fl.shape.kind, {{"logistic", fl::ModelKind::logistic}, {"dense", fl::ModelKind::dense}});
  s.read("features", fl.shape.features);
  s.read("classes", fl.shape.classes);
  s.read("hidden", fl.shape.hidden);
  s.read("learning_rate", fl.learning_rate);
  s.read("l2", fl.l2);
  s.read("separation", fl.separation);
  s.read("holdout_size", fl.holdout_size);
  s.read_enum("aggregation", fl.agg_mode, {{"normalized", fl::AggMode::normalized}, {"literal", fl::AggMode::literal}});
}

void parse_ledger(const json& j, ledger::LedgerConfig& l) {
  Section s(j, "ledger", {"quorum", "reward_coins", "verification_threshold", "interval_multiplier", "stake_pool"});
  s.read("quorum", l.quorum);
  s.read("reward_coins", l.reward_coins);
  s.read("verification_threshold", l.verification_threshold);
  s.read("interval_multiplier", l.interval_multiplier);
  s.read("stake_pool", l.stake_pool);
}

void parse_env(const json& j, env::EnvConfig& e) {
  Section s(j, "env", {"horizon", "b_min", "b_max", "tau_floor", "reward_mode", "constant_channel", "interference",
                       "rate_mode", "theta_local", "theta_global", "theta_threshold", "seed"});
  s.read("horizon", e.horizon);
  s.read("b_min", e.b_min);
  s.read("b_max", e.b_max);
  s.read("tau_floor", e.tau_floor);
  s.read_enum("reward_mode", e.reward_mode, {{"shared", env::RewardMode::shared}, {"per_agent", env::RewardMode::per_agent}});
  s.read("constant_channel", e.constant_channel);
  s.read_enum("interference", e.interference, {{"none", InterferenceModel::none}, {"all", InterferenceModel::all}});
  s.read_enum("rate_mode", e.rate_mode, {{"corrected", RateMode::corrected}, {"literal", RateMode::literal}});
  s.read("theta_local", e.accuracy.theta_local);
  s.read("theta_global", e.accuracy.theta_global);
  s.read("theta_threshold", e.accuracy.theta_threshold);
  s.read("seed", e.seed);
}

void parse_agent(const json& j, maddpg::AgentConfig& a) {
  Section s(j, "maddpg", {"hidden", "actor_lr", "critic_lr", "actor_preact_reg", "tau", "gamma", "reward_scale",
                          "target_noise", "target_noise_clip", "policy_delay", "updates_per_step", "mask_unassigned", "replay_capacity", "batch_size", "warmup", "ou_theta", "ou_sigma", "ou_mu", "ou_dt",
                          "ou_sigma_decay", "ou_sigma_min", "optimizer", "momentum"});
  s.read("hidden", a.hidden);
  s.read("actor_lr", a.actor_lr);
  s.read("critic_lr", a.critic_lr);
  s.read("actor_preact_reg", a.actor_reg);
  s.read("tau", a.tau);
  s.read("gamma", a.gamma);
  s.read("reward_scale", a.reward_scale);
  s.read("target_noise", a.target_noise);
  s.read("target_noise_clip", a.target_noise_clip);
  s.read("policy_delay", a.policy_delay);
  s.read("updates_per_step", a.updates_per_step);
  s.read("mask_unassigned", a.mask_unassigned);
  s.read("replay_capacity", a.replay_capacity);
  s.read("batch_size", a.batch_size);
  s.read("warmup", a.warmup);
  s.read("ou_theta", a.ou.theta);
  s.read("ou_sigma", a.ou.sigma);
  s.read("ou_mu", a.ou.mu);
  s.read("ou_dt", a.ou.dt);
  s.read("ou_sigma_decay", a.ou.sigma_decay);
  s.read("ou_sigma_min", a.ou.sigma_min);
  s.read_enum("optimizer", a.optimizer.kind,
              {{"sgd", maddpg::OptimizerKind::sgd},
               {"momentum", maddpg::OptimizerKind::momentum},
               {"adam", maddpg::OptimizerKind::adam}});
  s.read("momentum", a.optimizer.momentum);
}

const char* name(fl::ModelKind k) { return k == fl::ModelKind::dense ? "dense" : "logistic"; }
const char* name(fl::AggMode m) { return m == fl::AggMode::literal ? "literal" : "normalized"; }
const char* name(env::RewardMode m) { return m == env::RewardMode::per_agent ? "per_agent" : "shared"; }
const char* name(InterferenceModel m) { return m == InterferenceModel::all ? "all" : "none"; }
const char* name(RateMode m) { return m == RateMode::literal ? "literal" : "corrected"; }
const char* name(maddpg::OptimizerKind k) {
  switch (k) {
    case maddpg::OptimizerKind::sgd: return "sgd";
    case maddpg::OptimizerKind::momentum: return "momentum";
    case maddpg::OptimizerKind::adam: return "adam";
  }
  return "?";
}

std::ofstream open_csv(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << std::setprecision(12);
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_round_csvs(const std::filesystem::path& dir, std::span<const maddpg::EpisodeRecord> history) {
  auto lat = open_csv(dir / "latency_rounds.csv");
  auto lat_ep = open_csv(dir / "latency_episodes.csv");
  auto loss = open_csv(dir / "loss_rounds.csv");
  auto timing = open_csv(dir / "timing.csv");
  lat << "episode,round,t_iteration\n";
  lat_ep << "episode,mean_t_iteration,median_t_iteration\n";
  loss << "episode,round,global_loss\n";
  timing << "episode,round,seconds\n";
  for (const auto& r : history) {
    for (std::size_t t = 0; t < r.t_iteration.size(); ++t) {
      lat << r.episode << ',' << t << ',' << r.t_iteration[t] << '\n';
      loss << r.episode << ',' << t << ',' << r.global_loss[t] << '\n';
      timing << r.episode << ',' << t << ',' << r.step_seconds[t] << '\n';
    }
    lat_ep << r.episode << ',' << mean(r.t_iteration) << ',' << median(r.t_iteration) << '\n';
  }
}

void write_cost_csv(const std::filesystem::path& p, std::span<const double> cost) {
  auto out = open_csv(p);
  out << "episode,cumulative_avg_cost\n";
  for (std::size_t n = 0; n < cost.size(); ++n) out << n << ',' << cost[n] << '\n';
}

std::vector<double> cost_series(std::span<const maddpg::EpisodeRecord> history) {
  if (history.empty()) return {};
  auto r = cumulative_average_reward(history);
  for (double& x : r) x = -x;
  return r;
}

void write_eval(std::ostream& out, const char* policy, std::span<const maddpg::EpisodeRecord> history) {
  for (const auto& r : history)
    for (std::size_t t = 0; t < r.t_iteration.size(); ++t)
      out << policy << ',' << r.episode << ',' << t << ',' << r.t_iteration[t] << '\n';
}

void write_summary(const std::filesystem::path& p, const ExperimentConfig& c, const RunSummary& s) {
  std::ofstream out(p);
  out << std::setprecision(6);
  out << "policy: " << to_string(c.policy) << "\n";
  out << "episodes: " << s.episodes << "\n";
  out << "config digest: " << to_hex(config_digest(c)) << "\n";
  if (!s.cumulative_cost.empty()) out << "final cumulative average cost: " << s.cumulative_cost.back() << " s\n";
  if (s.evaluated) {
    out << "evaluation episodes: " << c.eval_episodes << "\n";
    out << "median iteration time, learned: " << s.median_learned << " s\n";
    out << "median iteration time, random:  " << s.median_random << " s\n";
    out << "median iteration time, average: " << s.median_average << " s\n";
    if (s.median_random > 0.0) out << "learned / random:  " << s.median_learned / s.median_random << "\n";
    if (s.median_average > 0.0) out << "learned / average: " << s.median_learned / s.median_average << "\n";
  }
}

void evaluate_all(const ExperimentConfig& c, env::Environment& e, maddpg::Maddpg& agents, RunSummary& s,
                  const std::filesystem::path& dir) {
  const auto learned = run_policy(e, learned_policy(agents), c.eval_episodes, kEvalEpisodeBase);
  const auto random = run_policy(e, random_policy(derive_seed(c.seed, 77)), c.eval_episodes, kEvalEpisodeBase);
  const auto average = run_policy(e, average_policy(), c.eval_episodes, kEvalEpisodeBase);
  s.median_learned = median_iteration_time(learned);
  s.median_random = median_iteration_time(random);
  s.median_average = median_iteration_time(average);
  s.evaluated = true;
  auto out = open_csv(dir / "eval.csv");
  out << "policy,episode,round,t_iteration\n";
  write_eval(out, "learned", learned);
  write_eval(out, "random", random);
  write_eval(out, "average", average);
}

std::string gamma_label(double g) {
  std::ostringstream s;
  s << g;
  return s.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  env.validate();
  agent.validate();
  for (double g : gamma_sweep)
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("gamma_sweep values must be in [0, 1]");
  if (policy == PolicyKind::learned && episodes > 0 && eval_episodes == 0)
    throw ConfigError("eval_episodes must be >= 1 for a learned policy");
}

ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir) {
  Section s(j, "config", {"network", "env", "fl", "ledger", "maddpg", "episodes", "eval_episodes", "policy",
                          "gamma_sweep", "seed", "output_dir", "parallel"});
  ExperimentConfig c;
  if (const json* n = s.child("network")) {
    if (n->is_string()) {
      const auto path = base_dir / n->get<std::string>();
      std::ifstream in(path);
      if (!in) throw ConfigError("network file not found: " + path.string());
      json nj;
      try {
        nj = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("network file " + path.string() + ": " + e.what());
      }
      c.network = parse_network_config(nj);
    } else {
      c.network = parse_network_config(*n);
    }
  }
  if (const json* e = s.child("env")) parse_env(*e, c.env);
  if (const json* f = s.child("fl")) parse_fl(*f, c.env.fl);
  if (const json* l = s.child("ledger")) parse_ledger(*l, c.env.ledger);
  if (const json* m = s.child("maddpg")) parse_agent(*m, c.agent);
  s.read("episodes", c.episodes);
  s.read("eval_episodes", c.eval_episodes);
  std::string policy;
  s.read("policy", policy);
  if (!policy.empty()) c.policy = parse_policy_kind(policy);
  s.read("gamma_sweep", c.gamma_sweep);
  s.read("seed", c.seed);
  std::string out;
  s.read("output_dir", out);
  if (!out.empty()) c.output_dir = out;
  s.read("parallel", c.parallel);
  c.env.exec = c.parallel ? Exec::parallel : Exec::serial;
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_experiment(j, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  const auto& e = c.env;
  const auto& a = c.agent;
  json j;
  j["network"] = to_json(c.network);
  j["env"] = {{"horizon", e.horizon},
              {"b_min", e.b_min},
              {"b_max", e.b_max},
              {"tau_floor", e.tau_floor},
              {"reward_mode", name(e.reward_mode)},
              {"constant_channel", e.constant_channel},
              {"interference", name(e.interference)},
              {"rate_mode", name(e.rate_mode)},
              {"theta_local", e.accuracy.theta_local},
              {"theta_global", e.accuracy.theta_global},
              {"theta_threshold", e.accuracy.theta_threshold},
              {"seed", e.seed}};
  j["fl"] = {{"model", name(e.fl.shape.kind)},
             {"features", e.fl.shape.features},
             {"classes", e.fl.shape.classes},
             {"hidden", e.fl.shape.hidden},
             {"learning_rate", e.fl.learning_rate},
             {"l2", e.fl.l2},
             {"separation", e.fl.separation},
             {"holdout_size", e.fl.holdout_size},
             {"aggregation", name(e.fl.agg_mode)}};
  j["ledger"] = {{"quorum", e.ledger.quorum},
                 {"reward_coins", e.ledger.reward_coins},
                 {"verification_threshold", e.ledger.verification_threshold},
                 {"interval_multiplier", e.ledger.interval_multiplier},
                 {"stake_pool", e.ledger.stake_pool}};
  j["maddpg"] = {{"hidden", a.hidden},
                 {"actor_lr", a.actor_lr},
                 {"critic_lr", a.critic_lr},
                 {"tau", a.tau},
                 {"actor_preact_reg", a.actor_reg},
                 {"gamma", a.gamma},
                 {"reward_scale", a.reward_scale},
                 {"target_noise", a.target_noise},
                 {"target_noise_clip", a.target_noise_clip},
                 {"policy_delay", a.policy_delay},
                 {"updates_per_step", a.updates_per_step},
                 {"mask_unassigned", a.mask_unassigned},
                 {"replay_capacity", a.replay_capacity},
                 {"batch_size", a.batch_size},
                 {"warmup", a.warmup},
                 {"ou_theta", a.ou.theta},
                 {"ou_sigma", a.ou.sigma},
                 {"ou_mu", a.ou.mu},
                 {"ou_dt", a.ou.dt},
                 {"ou_sigma_decay", a.ou.sigma_decay},
                 {"ou_sigma_min", a.ou.sigma_min},
                 {"optimizer", name(a.optimizer.kind)},
                 {"momentum", a.optimizer.momentum}};
  j["episodes"] = c.episodes;
  j["eval_episodes"] = c.eval_episodes;
  j["policy"] = to_string(c.policy);
  j["gamma_sweep"] = c.gamma_sweep;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["parallel"] = c.parallel;
  return j;
}

Digest config_digest(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("episodes");
  j.erase("eval_episodes");
  j.erase("policy");
  j.erase("gamma_sweep");
  j.erase("parallel");
  const std::string s = j.dump();
  return sha256({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

env::Environment make_environment(const ExperimentConfig& c) {
  return env::Environment(build_network(c.network), c.env);
}

maddpg::Maddpg make_agents(const ExperimentConfig& c, const env::Environment& e) {
  maddpg::Maddpg m(e.num_agents(), e.state_dim(), e.action_dim(), c.agent, derive_seed(c.seed, 11));
  if (c.agent.mask_unassigned) m.set_action_mask(maddpg::assignment_mask(e.num_agents(), e.num_twins(), e.action_dim()));
  return m;
}

Policy random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(make_rng(seed, 0));
  return [rng](const env::Environment& e, const env::EnvState&) {
    const auto b = e.bounds();
    env::JointAction joint(b.num_bs);
    for (auto& a : joint) {
      a.assoc_scores.assign(b.num_twins, 0.0);
      a.batch_fracs.resize(b.num_twins);
      a.bandwidth_shares.resize(b.num_subchannels);
    }
    std::uniform_int_distribution<std::size_t> pick(0, b.num_bs - 1);
    std::uniform_real_distribution<double> frac(b.b_min, b.b_max);
    for (std::size_t j = 0; j < b.num_twins; ++j) {
      const std::size_t bs = pick(*rng);
      joint[bs].assoc_scores[j] = 1.0;
      const double x = frac(*rng);
      for (auto& a : joint) a.batch_fracs[j] = x;
    }
    std::uniform_real_distribution<double> share(0.0, 1.0);
    for (auto& a : joint)
      for (double& t : a.bandwidth_shares) t = 1.0 - share(*rng);  // (0, 1]
    return joint;
  };
}

Policy average_policy() {
  return [](const env::Environment& e, const env::EnvState&) {
    const auto b = e.bounds();
    env::JointAction joint(b.num_bs);
    for (std::size_t i = 0; i < b.num_bs; ++i) {
      auto& a = joint[i];
      a.assoc_scores.assign(b.num_twins, 0.0);
      for (std::size_t j = i; j < b.num_twins; j += b.num_bs) a.assoc_scores[j] = 1.0;
      a.batch_fracs.assign(b.num_twins, 0.5 * (b.b_min + b.b_max));
      a.bandwidth_shares.assign(b.num_subchannels, 1.0 / static_cast<double>(b.num_bs));
    }
    return joint;
  };
}

Policy learned_policy(maddpg::Maddpg& agents) {
  return [&agents](const env::Environment& e, const env::EnvState& s) { return maddpg::act(e, agents, s, false); };
}

std::vector<maddpg::EpisodeRecord> run_policy(env::Environment& e, const Policy& p, std::size_t episodes,
                                              std::uint64_t first_episode) {
  using Clock = std::chrono::steady_clock;
  std::vector<maddpg::EpisodeRecord> out;
  out.reserve(episodes);
  for (std::size_t k = 0; k < episodes; ++k) {
    maddpg::EpisodeRecord rec;
    rec.episode = first_episode + k;
    env::EnvState s = e.reset(first_episode + k);
    for (bool done = false; !done;) {
      const auto t0 = Clock::now();
      auto o = e.step(p(e, s));
      rec.step_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
      rec.rewards.push_back(o.rewards);
      rec.t_iteration.push_back(o.breakdown.t_iteration);
      rec.global_loss.push_back(o.global_loss);
      done = o.done;
      s = std::move(o.next_state);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<double> cumulative_average_reward(std::span<const std::vector<double>> per_agent) {
  if (per_agent.empty()) throw std::invalid_argument("cumulative_average_reward: empty history");
  const std::size_t M = per_agent.front().size();
  if (M == 0) throw std::invalid_argument("cumulative_average_reward: no agents");
  std::vector<double> out(per_agent.size());
  double total = 0.0;
  for (std::size_t n = 0; n < per_agent.size(); ++n) {
    if (per_agent[n].size() != M) throw std::invalid_argument("cumulative_average_reward: ragged history");
    for (double r : per_agent[n]) total += r;
    out[n] = total / (static_cast<double>(n + 1) * static_cast<double>(M));
  }
  return out;
}

std::vector<double> cumulative_average_reward(std::span<const maddpg::EpisodeRecord> history) {
  std::vector<std::vector<double>> per_agent;
  per_agent.reserve(history.size());
  for (const auto& rec : history) {
    std::vector<double> totals(rec.rewards.empty() ? 0 : rec.rewards.front().size(), 0.0);
    for (const auto& step : rec.rewards)
      for (std::size_t i = 0; i < totals.size(); ++i) totals[i] += step[i];
    per_agent.push_back(std::move(totals));
  }
  return cumulative_average_reward(per_agent);
}

double median_iteration_time(std::span<const maddpg::EpisodeRecord> history) {
  std::vector<double> all;
  for (const auto& r : history) all.insert(all.end(), r.t_iteration.begin(), r.t_iteration.end());
  return median(std::move(all));
}

void write_metrics(std::ostream& out, std::span<const maddpg::EpisodeRecord> history) {
  out << std::setprecision(12);
  out << "episode,mean_iteration_time,episode_reward,cumulative_avg_reward,global_loss,critic_loss,actor_objective\n";
  const auto rn = history.empty() ? std::vector<double>{} : cumulative_average_reward(history);
  for (std::size_t k = 0; k < history.size(); ++k) {
    const auto& r = history[k];
    out << r.episode << ',' << mean(r.t_iteration) << ',' << r.total_reward() << ',' << rn[k] << ','
        << (r.global_loss.empty() ? 0.0 : r.global_loss.back()) << ',' << r.critic_loss << ',' << r.actor_objective
        << '\n';
  }
}

RunSummary run_experiment(const ExperimentConfig& c, const std::filesystem::path& dir, bool quiet) {
  c.validate();
  std::filesystem::create_directories(dir);
  auto e = make_environment(c);
  RunSummary s;
  s.episodes = c.episodes;

  if (c.policy == PolicyKind::learned) {
    auto agents = make_agents(c, e);
    maddpg::TrainOptions opts;
    opts.episodes = c.episodes;
    opts.exec = c.parallel ? Exec::parallel : Exec::serial;
    if (!quiet)
      opts.on_episode = [&](const maddpg::EpisodeRecord& r) {
        if ((r.episode + 1) % 25 == 0 || r.episode + 1 == c.episodes)
          std::cerr << "episode " << r.episode + 1 << "/" << c.episodes << "  mean T " << mean(r.t_iteration)
                    << " s  critic loss " << r.critic_loss << "\n";
      };
    s.history = maddpg::train(e, agents, opts);
    agents.save(dir / "model.ckpt", config_digest(c));
    if (c.episodes > 0) evaluate_all(c, e, agents, s, dir);
  } else {
    const Policy p = c.policy == PolicyKind::random ? random_policy(derive_seed(c.seed, 77)) : average_policy();
    s.history = run_policy(e, p, c.episodes, 0);
  }

  s.cumulative_cost = cost_series(s.history);
  {
    auto out = open_csv(dir / "metrics.csv");
    write_metrics(out, s.history);
  }
  write_round_csvs(dir, s.history);
  write_cost_csv(dir / "cumulative_cost.csv", s.cumulative_cost);
  write_summary(dir / "summary.txt", c, s);
  return s;
}

std::vector<RunSummary> gamma_sweep(const ExperimentConfig& c, std::span<const double> gammas,
                                    const std::filesystem::path& dir, bool quiet) {
  if (gammas.empty()) throw std::invalid_argument("gamma_sweep: empty gamma list");
  std::vector<RunSummary> runs;
  for (double g : gammas) {
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("gamma_sweep values must be in [0, 1]");
    ExperimentConfig member = c;
    member.agent.gamma = g;
    member.policy = PolicyKind::learned;
    runs.push_back(run_experiment(member, dir / ("gamma_" + gamma_label(g)), quiet));
  }
  auto cost = open_csv(dir / "sweep_cost.csv");
  auto timing = open_csv(dir / "sweep_timing.csv");
  cost << "episode";
  timing << "episode,round";
  for (double g : gammas) {
    cost << ",gamma_" << gamma_label(g);
    timing << ",gamma_" << gamma_label(g);
  }
  cost << '\n';
  timing << '\n';
  for (std::size_t n = 0; n < c.episodes; ++n) {
    cost << n;
    for (const auto& r : runs) cost << ',' << r.cumulative_cost[n];
    cost << '\n';
    for (std::size_t t = 0; t < runs.front().history[n].step_seconds.size(); ++t) {
      timing << n << ',' << t;
      for (const auto& r : runs) timing << ',' << r.history[n].step_seconds[t];
      timing << '\n';
    }
  }
  return runs;
}

RunSummary replay_checkpoint(const ExperimentConfig& c, const std::filesystem::path& checkpoint,
                             const std::filesystem::path& dir) {
  c.validate();
  std::filesystem::create_directories(dir);
  auto e = make_environment(c);
  auto agents = make_agents(c, e);
  const Digest d = config_digest(c);
  agents.load(checkpoint, &d);
  RunSummary s;
  evaluate_all(c, e, agents, s, dir);
  write_summary(dir / "summary.txt", c, s);
  return s;
}

}  // namespace dtfl::harness
