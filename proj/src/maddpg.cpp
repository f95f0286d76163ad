#include "dtfl/maddpg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace dtfl::maddpg {

OUNoise::OUNoise(std::size_t dim, OUConfig cfg, std::uint64_t seed) : cfg_(cfg), x_(dim, cfg.mu), rng_(seed) {
  if (!(cfg.theta > 0.0) || !(cfg.sigma >= 0.0) || !(cfg.dt > 0.0) || !std::isfinite(cfg.mu))
    throw std::invalid_argument("OUNoise: need theta > 0, sigma >= 0, dt > 0");
}

const std::vector<double>& OUNoise::sample() {
  std::normal_distribution<double> n(0.0, 1.0);
  const double s = cfg_.sigma * std::sqrt(cfg_.dt);
  for (double& x : x_) x += cfg_.theta * (cfg_.mu - x) * cfg_.dt + s * n(rng_);
  return x_;
}

void OUNoise::reset() { std::fill(x_.begin(), x_.end(), cfg_.mu); }

void OUNoise::set_sigma(double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("OUNoise: sigma must be >= 0");
  cfg_.sigma = sigma;
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayMemory: capacity must be >= 1");
}

void ReplayMemory::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t n, Rng& rng) const {
  const std::size_t size = data_.size();
  if (n > size) throw std::invalid_argument("ReplayMemory: batch larger than memory");
  // Floyd's algorithm: n distinct values from [0, size) with n draws.
  std::vector<std::size_t> out;
  out.reserve(n);
  std::unordered_set<std::size_t> taken;
  for (std::size_t j = size - n; j < size; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (taken.insert(t).second) {
      out.push_back(t);
    } else {
      taken.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

Batch make_batch(const ReplayMemory& memory, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const Transition& first = memory.at(indices[0]);
  Batch b;
  b.state.resize(indices.size(), first.state.size());
  b.joint_action.resize(indices.size(), first.joint_action.size());
  b.next_state.resize(indices.size(), first.next_state.size());
  b.reward.resize(indices.size());
  b.done.resize(indices.size());
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const Transition& t = memory.at(indices[n]);
    std::copy(t.state.begin(), t.state.end(), b.state.row(n));
    std::copy(t.joint_action.begin(), t.joint_action.end(), b.joint_action.row(n));
    std::copy(t.next_state.begin(), t.next_state.end(), b.next_state.row(n));
    b.reward[n] = t.reward;
    b.done[n] = t.done ? 1.0 : 0.0;
  }
  return b;
}

void AgentConfig::validate() const {
  if (hidden.empty()) throw ConfigError("maddpg: need at least one hidden layer");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("maddpg: hidden layer width must be >= 1");
  if (actor_lr < 0.0 || critic_lr < 0.0) throw ConfigError("maddpg: learning rates must be >= 0");
  if (!(actor_reg >= 0.0)) throw ConfigError("maddpg: actor_preact_reg must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("maddpg: soft-update rate must be in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("maddpg: gamma must be in [0, 1]");
  if (!(reward_scale > 0.0 && std::isfinite(reward_scale))) throw ConfigError("maddpg: reward_scale must be > 0");
  if (!(target_noise >= 0.0) || !(target_noise_clip >= 0.0))
    throw ConfigError("maddpg: target noise and its clip must be >= 0");
  if (policy_delay == 0) throw ConfigError("maddpg: policy_delay must be >= 1");
  if (updates_per_step == 0) throw ConfigError("maddpg: updates_per_step must be >= 1");
  if (replay_capacity == 0 || batch_size == 0) throw ConfigError("maddpg: replay capacity and batch size must be >= 1");
  if (batch_size > replay_capacity) throw ConfigError("maddpg: batch size exceeds replay capacity");
  if (!(ou.theta > 0.0) || ou.sigma < 0.0 || !(ou.dt > 0.0)) throw ConfigError("maddpg: bad OU parameters");
  if (!(ou.sigma_decay > 0.0 && ou.sigma_decay <= 1.0) || ou.sigma_min < 0.0)
    throw ConfigError("maddpg: OU sigma decay must be in (0, 1] and sigma_min >= 0");
}

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

// [state | joint action] rows.
Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix m(a.rows, a.cols + b.cols);
  for (std::size_t n = 0; n < a.rows; ++n) {
    std::copy(a.row(n), a.row(n) + a.cols, m.row(n));
    std::copy(b.row(n), b.row(n) + b.cols, m.row(n) + a.cols);
  }
  return m;
}

// joint * mask when a mask is set; the mask itself is left in `m`.
Matrix apply_mask(const ActionMask& mask, const Matrix& joint, Matrix& m) {
  if (!mask) return joint;
  m = Matrix(joint.rows, joint.cols, 1.0);
  mask(joint, m);
  Matrix out = joint;
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] *= m.data[k];
  return out;
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw DivergenceError(what);
}

}  // namespace

ActionMask assignment_mask(std::size_t num_agents, std::size_t num_twins, std::size_t action_dim) {
  if (num_agents == 0 || 2 * num_twins > action_dim) throw std::invalid_argument("assignment_mask: bad layout");
  return [=](const Matrix& joint, Matrix& mask) {
    if (joint.cols != num_agents * action_dim || mask.rows != joint.rows || mask.cols != joint.cols)
      throw std::invalid_argument("assignment_mask: shape mismatch");
    for (std::size_t n = 0; n < joint.rows; ++n) {
      const double* x = joint.row(n);
      double* w = mask.row(n);
      for (std::size_t j = 0; j < num_twins; ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < num_agents; ++i)
          if (x[i * action_dim + j] > x[best * action_dim + j]) best = i;
        for (std::size_t i = 0; i < num_agents; ++i) w[i * action_dim + num_twins + j] = i == best ? 1.0 : 0.0;
      }
    }
  };
}

Maddpg::Maddpg(std::size_t num_agents, std::size_t state_dim, std::size_t action_dim, AgentConfig cfg,
               std::uint64_t seed)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (num_agents == 0 || state_dim == 0 || action_dim == 0) throw ConfigError("maddpg: empty dimensions");
  const std::size_t critic_in = state_dim + num_agents * action_dim;
  agents_.resize(num_agents);
  for (std::size_t i = 0; i < num_agents; ++i) {
    Agent& a = agents_[i];
    a.id = i;
    a.rng = make_rng(seed, derive_seed(i, 1));
    a.actor = DenseNet(layer_sizes(state_dim, cfg_.hidden, action_dim), Activation::relu, Activation::tanh);
    a.critic = DenseNet(layer_sizes(critic_in, cfg_.hidden, 1), Activation::relu, Activation::linear);
    a.actor.init(a.rng);
    a.critic.init(a.rng);
    a.actor_target = a.actor;
    a.critic_target = a.critic;
    a.actor_opt = Optimizer(a.actor.num_params(), cfg_.optimizer);
    a.critic_opt = Optimizer(a.critic.num_params(), cfg_.optimizer);
    a.memory = ReplayMemory(cfg_.replay_capacity);
    a.noise = OUNoise(action_dim, cfg_.ou, derive_seed(seed, derive_seed(i, 2)));
  }
}

std::vector<double> Maddpg::select_action(std::size_t agent, std::span<const double> state, bool explore) {
  Agent& a = agents_.at(agent);
  std::vector<double> out = a.actor.forward(state);
  check_finite(out, "actor produced a non-finite action");
  if (explore) {
    const auto& n = a.noise.sample();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::clamp(out[k] + n[k], -1.0, 1.0);
  }
  return out;
}

void Maddpg::reset_noise() {
  for (auto& a : agents_) a.noise.reset();
}

void Maddpg::schedule_noise(std::size_t episode) {
  const auto& ou = cfg_.ou;
  const double sigma = std::max(ou.sigma_min, ou.sigma * std::pow(ou.sigma_decay, static_cast<double>(episode)));
  for (auto& a : agents_) a.noise.set_sigma(std::min(sigma, ou.sigma));
}

void Maddpg::store(std::span<const double> state, std::span<const double> joint_action,
                   std::span<const double> rewards, std::span<const double> next_state, bool done) {
  if (state.size() != state_dim_ || next_state.size() != state_dim_ ||
      joint_action.size() != action_dim_ * agents_.size() || rewards.size() != agents_.size())
    throw std::invalid_argument("Maddpg::store: shape mismatch");
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    Transition t;
    t.state.assign(state.begin(), state.end());
    t.joint_action.assign(joint_action.begin(), joint_action.end());
    t.reward = cfg_.reward_scale * rewards[i];
    t.next_state.assign(next_state.begin(), next_state.end());
    t.done = done;
    agents_[i].memory.push(std::move(t));
  }
}

std::vector<double> critic_target(std::span<const Agent> agents, std::size_t i, const Batch& batch, double gamma,
                                  Exec exec, double noise_sigma, double noise_clip, Rng* rng, const ActionMask& mask) {
  const std::size_t B = batch.size();
  if (batch.next_state.rows != B || i >= agents.size()) throw std::invalid_argument("critic_target: shape mismatch");
  if (noise_sigma > 0.0 && rng == nullptr) throw std::invalid_argument("critic_target: smoothing needs an rng");
  const std::size_t A = agents[0].actor_target.output_dim();
  Matrix joint(B, A * agents.size());
  DenseNet::Cache cache;
  for (std::size_t j = 0; j < agents.size(); ++j) {
    const Matrix& a = agents[j].actor_target.forward(batch.next_state, cache, exec);
    for (std::size_t n = 0; n < B; ++n) std::copy(a.row(n), a.row(n) + A, joint.row(n) + j * A);
  }
  if (noise_sigma > 0.0) {
    std::normal_distribution<double> g(0.0, noise_sigma);
    for (double& v : joint.data) v = std::clamp(v + std::clamp(g(*rng), -noise_clip, noise_clip), -1.0, 1.0);
  }
  Matrix m;
  const Matrix in = concat_cols(batch.next_state, apply_mask(mask, joint, m));
  if (in.cols != agents[i].critic_target.input_dim()) throw std::invalid_argument("critic_target: shape mismatch");
  const Matrix& q = agents[i].critic_target.forward(in, cache, exec);
  std::vector<double> y(B);
  for (std::size_t n = 0; n < B; ++n) y[n] = batch.reward[n] + gamma * (1.0 - batch.done[n]) * q(n, 0);
  return y;
}

double update_critic(Agent& agent, const Batch& batch, std::span<const double> targets, double lr, Exec exec,
                     const ActionMask& mask) {
  const std::size_t B = batch.size();
  if (B == 0 || targets.size() != B) throw std::invalid_argument("update_critic: empty batch or target mismatch");
  Matrix m;
  const Matrix in = concat_cols(batch.state, apply_mask(mask, batch.joint_action, m));
  DenseNet::Cache cache;
  const Matrix& q = agent.critic.forward(in, cache, exec);
  Matrix dy(B, 1);
  double loss = 0.0;
  for (std::size_t n = 0; n < B; ++n) {
    const double e = q(n, 0) - targets[n];
    loss += e * e;
    dy(n, 0) = 2.0 * e / static_cast<double>(B);
  }
  loss /= static_cast<double>(B);
  if (!std::isfinite(loss)) throw DivergenceError("critic loss is not finite");
  std::vector<double> grad(agent.critic.num_params());
  agent.critic.backward(cache, dy, grad, nullptr, exec);
  agent.critic_opt.step(agent.critic.params(), grad, lr);
  return loss;
}

double update_actor(Agent& agent, std::size_t action_offset, const Batch& batch, double lr, Exec exec, double reg,
                    const ActionMask& mask) {
  const std::size_t B = batch.size();
  if (B == 0) throw std::invalid_argument("update_actor: empty batch");
  const std::size_t A = agent.actor.output_dim();
  if (action_offset + A > batch.joint_action.cols) throw std::invalid_argument("update_actor: action block out of range");

  DenseNet::Cache actor_cache;
  const Matrix& mine = agent.actor.forward(batch.state, actor_cache, exec);
  Matrix joint = batch.joint_action;
  for (std::size_t n = 0; n < B; ++n) std::copy(mine.row(n), mine.row(n) + A, joint.row(n) + action_offset);
  Matrix m;
  const Matrix in = concat_cols(batch.state, apply_mask(mask, joint, m));

  DenseNet::Cache critic_cache;
  const Matrix& q = agent.critic.forward(in, critic_cache, exec);
  double mean_q = 0.0;
  for (std::size_t n = 0; n < B; ++n) mean_q += q(n, 0);
  mean_q /= static_cast<double>(B);

  Matrix dq(B, 1, -1.0 / static_cast<double>(B));
  std::vector<double> critic_grad(agent.critic.num_params());
  Matrix dx;
  agent.critic.backward(critic_cache, dq, critic_grad, &dx, exec);

  Matrix da(B, A);
  const std::size_t col = batch.state.cols + action_offset;
  for (std::size_t n = 0; n < B; ++n) std::copy(dx.row(n) + col, dx.row(n) + col + A, da.row(n));
  if (mask)
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t k = 0; k < A; ++k) da(n, k) *= m(n, action_offset + k);
  std::vector<double> grad(agent.actor.num_params());
  if (reg > 0.0) {
    Matrix dz = actor_cache.pre.back();
    for (double& v : dz.data) v *= 2.0 * reg / static_cast<double>(dz.data.size());
    agent.actor.backward(actor_cache, da, grad, nullptr, exec, &dz);
  } else {
    agent.actor.backward(actor_cache, da, grad, nullptr, exec);
  }
  check_finite(grad, "actor gradient is not finite");
  agent.actor_opt.step(agent.actor.params(), grad, lr);
  return mean_q;
}

void soft_update(Agent& agent, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::domain_error("soft update rate must be in (0, 1]");
  auto blend = [beta](std::span<const double> src, std::span<double> dst) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = beta * src[k] + (1.0 - beta) * dst[k];
  };
  blend(agent.actor.params(), agent.actor_target.params());
  blend(agent.critic.params(), agent.critic_target.params());
}

Maddpg::UpdateStats Maddpg::update(Exec exec) {
  UpdateStats stats;
  const std::size_t warmup = std::max(cfg_.warmup == 0 ? cfg_.batch_size : cfg_.warmup, cfg_.batch_size);
  for (const auto& a : agents_)
    if (a.memory.size() < warmup) return stats;

  const std::size_t M = agents_.size();
  std::vector<double> critic_loss(M), actor_obj(M);
  std::vector<std::exception_ptr> errors(M);
  const bool policy_step = updates_++ % cfg_.policy_delay == 0;
  if (cfg_.mask_unassigned && !mask_) throw std::logic_error("Maddpg::update: masking enabled but no mask set");
  const ActionMask no_mask;
  auto work = [&](std::size_t i) {
    try {
      Agent& a = agents_[i];
      const auto idx = a.memory.sample_indices(cfg_.batch_size, a.rng);
      const Batch batch = make_batch(a.memory, idx);
      const ActionMask& mask = cfg_.mask_unassigned ? mask_ : no_mask;
      const auto y = critic_target(agents_, i, batch, cfg_.gamma, Exec::serial, cfg_.target_noise,
                                   cfg_.target_noise_clip, &a.rng, mask);
      critic_loss[i] = update_critic(a, batch, y, cfg_.critic_lr, Exec::serial, mask);
      if (policy_step)
        actor_obj[i] = update_actor(a, i * action_dim_, batch, cfg_.actor_lr, Exec::serial, cfg_.actor_reg, mask);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  // Agent i only writes its own nets and reads the targets, which stay fixed
  // until the soft updates below.
  const auto n = static_cast<std::ptrdiff_t>(M);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) work(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) work(static_cast<std::size_t>(i));
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (policy_step)
    for (auto& a : agents_) soft_update(a, cfg_.tau);

  for (std::size_t i = 0; i < M; ++i) {
    stats.critic_loss += critic_loss[i] / static_cast<double>(M);
    stats.actor_objective += actor_obj[i] / static_cast<double>(M);
  }
  stats.updated = true;
  stats.actor_updated = policy_step;
  return stats;
}

namespace {

constexpr char kMagic[4] = {'D', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void Maddpg::save(const std::filesystem::path& path, const Digest& config_digest) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put(out, kVersion);
  out.write(reinterpret_cast<const char*>(config_digest.data()), static_cast<std::streamsize>(config_digest.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(agents_.size()));
  put<std::uint64_t>(out, state_dim_);
  put<std::uint64_t>(out, action_dim_);
  for (const auto& a : agents_) {
    write_net(out, a.actor);
    write_net(out, a.critic);
    write_net(out, a.actor_target);
    write_net(out, a.critic_target);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

void Maddpg::load(const std::filesystem::path& path, const Digest* expected_digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("checkpoint: bad magic");
  if (get<std::uint32_t>(in) != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  Digest digest{};
  if (!in.read(reinterpret_cast<char*>(digest.data()), static_cast<std::streamsize>(digest.size())))
    throw std::runtime_error("checkpoint: truncated file");
  if (expected_digest != nullptr && digest != *expected_digest)
    throw std::runtime_error("checkpoint: config digest mismatch");
  if (get<std::uint32_t>(in) != agents_.size() || get<std::uint64_t>(in) != state_dim_ ||
      get<std::uint64_t>(in) != action_dim_)
    throw std::runtime_error("checkpoint: agent layout mismatch");
  for (auto& a : agents_) {
    DenseNet nets[4] = {read_net(in), read_net(in), read_net(in), read_net(in)};
    if (nets[0].sizes() != a.actor.sizes() || nets[1].sizes() != a.critic.sizes() ||
        nets[2].sizes() != a.actor.sizes() || nets[3].sizes() != a.critic.sizes())
      throw std::runtime_error("checkpoint: network shape mismatch");
    a.actor = std::move(nets[0]);
    a.critic = std::move(nets[1]);
    a.actor_target = std::move(nets[2]);
    a.critic_target = std::move(nets[3]);
  }
}

double EpisodeRecord::total_reward() const {
  double s = 0.0;
  for (const auto& step : rewards)
    for (double r : step) s += r;
  return s;
}

env::JointAction act(const env::Environment& env, Maddpg& agents, const env::EnvState& s, bool explore,
                     std::vector<double>* actor_space) {
  const auto x = env.encode(s);
  env::JointAction joint;
  joint.reserve(agents.num_agents());
  if (actor_space != nullptr) actor_space->clear();
  for (std::size_t i = 0; i < agents.num_agents(); ++i) {
    const auto a = agents.select_action(i, x, explore);
    joint.push_back(env.from_actor(a));
    if (actor_space != nullptr) actor_space->insert(actor_space->end(), a.begin(), a.end());
  }
  return joint;
}

std::vector<EpisodeRecord> train(env::Environment& env, Maddpg& agents, const TrainOptions& opts) {
  if (env.num_agents() != agents.num_agents() || env.state_dim() != agents.state_dim() ||
      env.action_dim() != agents.action_dim())
    throw std::invalid_argument("train: environment and agents disagree on dimensions");
  using Clock = std::chrono::steady_clock;
  std::vector<EpisodeRecord> history;
  history.reserve(opts.episodes);
  std::vector<double> joint;
  for (std::size_t e = 0; e < opts.episodes; ++e) {
    EpisodeRecord rec;
    rec.episode = e;
    env::EnvState s = env.reset(opts.first_episode + e);
    agents.reset_noise();
    agents.schedule_noise(e);
    std::size_t updates = 0, actor_updates = 0;
    for (bool done = false; !done;) {
      const auto t0 = Clock::now();
      const auto action = act(env, agents, s, true, &joint);
      auto out = env.step(action);
      agents.store(env.encode(s), joint, out.rewards, env.encode(out.next_state), out.done);
      for (std::size_t k = 0; k < agents.config().updates_per_step; ++k) {
        const auto stats = agents.update(opts.exec);
        if (stats.updated) {
          rec.critic_loss += stats.critic_loss;
          ++updates;
        }
        if (stats.actor_updated) {
          rec.actor_objective += stats.actor_objective;
          ++actor_updates;
        }
      }
      rec.step_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
      rec.rewards.push_back(out.rewards);
      rec.t_iteration.push_back(out.breakdown.t_iteration);
      rec.global_loss.push_back(out.global_loss);
      done = out.done;
      s = std::move(out.next_state);
    }
    if (updates > 0) rec.critic_loss /= static_cast<double>(updates);
    if (actor_updates > 0) rec.actor_objective /= static_cast<double>(actor_updates);
    if (opts.on_episode) opts.on_episode(rec);
    history.push_back(std::move(rec));
  }
  return history;
}

EpisodeRecord evaluate(env::Environment& env, Maddpg& agents, std::uint64_t episode) {
  using Clock = std::chrono::steady_clock;
  EpisodeRecord rec;
  rec.episode = episode;
  env::EnvState s = env.reset(episode);
  for (bool done = false; !done;) {
    const auto t0 = Clock::now();
    auto out = env.step(act(env, agents, s, false));
    rec.step_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    rec.rewards.push_back(out.rewards);
    rec.t_iteration.push_back(out.breakdown.t_iteration);
    rec.global_loss.push_back(out.global_loss);
    done = out.done;
    s = std::move(out.next_state);
  }
  return rec;
}

}  // namespace dtfl::maddpg
