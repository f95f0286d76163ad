#include <doctest.h>

#include <sstream>

#include "dtfl/env.hpp"
#include "oracles/latency_oracle.hpp"
#include "support.hpp"

using namespace dtfl;
using namespace dtfl::env;

namespace {

Environment make_env(std::size_t users = 4, std::size_t bs = 2, std::size_t channels = 2, EnvConfig cfg = {}) {
  cfg.horizon = cfg.horizon == EnvConfig{}.horizon ? 5 : cfg.horizon;
  cfg.fl.holdout_size = 60;
  return Environment(build_network(testing::small_config(users, bs, channels, std::min<std::size_t>(bs, 2))), cfg);
}

// Every BS scores twin j highest on `target[j]`; b = 0.5; even tau.
JointAction action_for(const std::vector<std::size_t>& target, std::size_t m, std::size_t c) {
  JointAction a(m);
  for (std::size_t i = 0; i < m; ++i) {
    a[i].assoc_scores.assign(target.size(), 0.0);
    for (std::size_t j = 0; j < target.size(); ++j) a[i].assoc_scores[j] = target[j] == i ? 1.0 : 0.0;
    a[i].batch_fracs.assign(target.size(), 0.5);
    a[i].bandwidth_shares.assign(c, 1.0);
  }
  return a;
}

JointAction random_raw(const Bounds& b, Rng& rng) {
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_int_distribution<int> tie(0, 4);
  JointAction a(b.num_bs);
  for (auto& x : a) {
    x.assoc_scores.resize(b.num_twins);
    x.batch_fracs.resize(b.num_twins);
    x.bandwidth_shares.resize(b.num_subchannels);
    for (double& v : x.assoc_scores) v = tie(rng) == 0 ? 1.0 : g(rng);
    for (double& v : x.batch_fracs) v = g(rng);
    for (double& v : x.bandwidth_shares) v = tie(rng) == 0 ? 0.0 : g(rng);
  }
  return a;
}

oracle::RawBreakdown recompute(const SystemState& s) {
  const NetworkModel& net = *s.net;
  oracle::RawState r;
  r.M = net.num_bs;
  r.C = net.num_subchannels;
  r.fC = net.bs_cpu_freq;
  r.fS = net.validation_freq;
  for (std::size_t j = 0; j < s.assoc.num_twins(); ++j) r.twin_bs.push_back(*s.assoc.bs_of(j));
  r.D = s.assoc.data_sizes();
  r.b = s.batch_fracs;
  r.tau = s.alloc.tau;
  r.hU = s.channel.uplink_gain;
  r.hD = s.channel.downlink_gain;
  r.r = s.channel.distance;
  r.nU = s.channel.uplink_interferers;
  r.nD = s.channel.downlink_interferers;
  r.PU = net.bs_tx_power;
  r.PD = net.mbs_tx_power;
  r.WU = net.uplink_bandwidth;
  r.WD = net.downlink_bandwidth;
  r.N0 = net.noise_power;
  r.alpha = net.path_loss_exponent;
  r.cyc_sample = net.cycles_per_sample;
  r.cyc_agg = net.cycles_per_agg_unit;
  r.cyc_val = net.cycles_per_validation_unit;
  r.xi = net.tx_factor;
  r.w_bits = net.model_size_bits;
  r.producers = s.producers;
  r.producer = s.producer;
  r.SB = s.block_bits;
  return oracle::evaluate(r);
}

}  // namespace

TEST_CASE("observe: round robin counts, constant channel, reassociation") {
  EnvConfig cfg;
  cfg.constant_channel = true;
  auto env = make_env(4, 2, 2, cfg);
  const auto s = env.reset(0);
  CHECK(s.twin_counts == std::vector<double>{2.0, 2.0});
  for (double h : s.channel_gains) CHECK(h == 1.0);
  CHECK(s.cpu_freq == env.network().bs_cpu_freq);
  CHECK(s.data_sizes.size() == 4);

  const auto out = env.step(action_for({1, 1, 0, 1}, 2, 2));
  CHECK(out.next_state.twin_counts == std::vector<double>{1.0, 3.0});
  for (double h : out.next_state.channel_gains) CHECK(h == 1.0);
  CHECK(env.observe().twin_counts == out.next_state.twin_counts);
}

TEST_CASE("project_action examples") {
  Bounds b{3, 1, 1, 0.1, 1.0};
  JointAction raw(3);
  for (auto& a : raw) {
    a.assoc_scores = {0.2};
    a.batch_fracs = {7.3};
    a.bandwidth_shares = {0.4};
  }
  raw[1].batch_fracs = {-2.0};
  const auto p = project_action(raw, b);
  CHECK(p[0].assoc_scores[0] == 1.0);
  CHECK(p[1].assoc_scores[0] == 0.0);
  CHECK(p[2].assoc_scores[0] == 0.0);
  CHECK(p[0].batch_fracs[0] == 1.0);
  CHECK(p[1].batch_fracs[0] == 0.1);
  for (const auto& a : p) CHECK(a.bandwidth_shares[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  for (auto& a : raw) a.bandwidth_shares = {-1.0};
  for (const auto& a : project_action(raw, b)) CHECK(a.bandwidth_shares[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  raw[2].assoc_scores = {std::nan("")};
  CHECK_THROWS_AS(project_action(raw, b), std::invalid_argument);
  raw.pop_back();
  CHECK_THROWS_AS(project_action(raw, b), std::invalid_argument);
}

TEST_CASE("property: projection is total over random raw actions") {
  Rng rng(31337);
  const Bounds b{5, 20, 5, 0.1, 1.0};
  for (int k = 0; k < 10000; ++k) {
    const auto raw = random_raw(b, rng);
    const auto p = project_action(raw, b);
    const auto d = decode(p, b);
    REQUIRE(d.assoc.complete());
    for (std::size_t j = 0; j < b.num_twins; ++j) {
      int ones = 0;
      for (std::size_t i = 0; i < b.num_bs; ++i) ones += p[i].assoc_scores[j] == 1.0;
      REQUIRE(ones == 1);
      REQUIRE(d.batch_fracs[j] >= b.b_min);
      REQUIRE(d.batch_fracs[j] <= b.b_max);
    }
    for (std::size_t c = 0; c < b.num_subchannels; ++c) REQUIRE(d.alloc.column_sum(c) <= 1.0 + 1e-9);
    REQUIRE(feasible(d, b));
    // Projection is idempotent.
    const auto again = project_action(p, b);
    for (std::size_t i = 0; i < b.num_bs; ++i) REQUIRE(again[i].assoc_scores == p[i].assoc_scores);
  }
}

TEST_CASE("reward and discounted return") {
  LatencyBreakdown bd;
  CHECK(reward(bd, 3, RewardMode::shared) == std::vector<double>{0.0, 0.0, 0.0});
  bd.t_iteration = 2.5;
  CHECK(reward(bd, 2, RewardMode::shared) == std::vector<double>{-2.5, -2.5});
  bd.per_bs_training = {0.5, 1.0};
  bd.per_bs_tx = {0.25, 1.75};
  bd.t_block_validation = 0.25;
  CHECK(reward(bd, 2, RewardMode::per_agent) == std::vector<double>{-1.0, -3.0});

  const std::vector<double> r{-1.0, -2.0};
  CHECK(discounted_return(r, 0.0) == -1.0);
  CHECK(discounted_return(std::vector<double>{-1, -1, -1}, 1.0) == -3.0);
  CHECK(discounted_return(r, 0.9) == doctest::Approx(-2.8).epsilon(1e-15));
  CHECK_THROWS_AS(discounted_return(r, 1.1), std::domain_error);
}

TEST_CASE("step: determinism, reward consistency and shared reward") {
  auto a = make_env(6, 3, 2), b = make_env(6, 3, 2);
  a.reset(3);
  b.reset(3);
  Rng rng(5);
  for (int t = 0; t < 5; ++t) {
    const auto act = random_raw(a.bounds(), rng);
    const auto x = a.step(act);
    const auto y = b.step(act);
    CHECK(x.rewards == y.rewards);
    CHECK(x.global_loss == y.global_loss);
    CHECK(x.next_state.channel_gains == y.next_state.channel_gains);
    CHECK(x.breakdown.t_iteration == y.breakdown.t_iteration);

    CHECK(*std::max_element(x.rewards.begin(), x.rewards.end()) ==
          *std::min_element(x.rewards.begin(), x.rewards.end()));
    const auto ref = recompute(x.applied);
    if (std::isinf(ref.T))
      CHECK(-x.rewards[0] == ref.T);  // a BS with twins but no bandwidth
    else
      CHECK(testing::rel_err(-x.rewards[0], ref.T) < 1e-9);
    CHECK(x.block_accepted);
    CHECK(x.invalid_txs + x.models_aggregated <= 3);
    CHECK(x.done == (t == 4));
  }
  CHECK(a.ledger().chain().height() == 5);
  CHECK(a.sim_time() > 0.0);
}

TEST_CASE("starving one BS of bandwidth makes it the bottleneck") {
  EnvConfig cfg;
  cfg.constant_channel = true;
  auto bal = make_env(6, 3, 2, cfg), starved = make_env(6, 3, 2, cfg);
  bal.reset(0);
  starved.reset(0);
  const std::vector<std::size_t> target{0, 1, 2, 0, 1, 2};
  auto even = action_for(target, 3, 2);
  auto skew = even;
  skew[2].bandwidth_shares = {0.01, 0.01};
  const auto x = bal.step(even);
  const auto y = starved.step(skew);
  CHECK(y.breakdown.t_param_tx == y.breakdown.per_bs_tx[2]);
  CHECK(y.breakdown.per_bs_tx[2] > y.breakdown.per_bs_tx[0]);
  CHECK(y.rewards[0] < x.rewards[0]);
}

TEST_CASE("tampered training record is excluded from aggregation") {
  auto clean = make_env(6, 3, 2), dirty = make_env(6, 3, 2);
  clean.reset(1);
  dirty.reset(1);
  dirty.set_fault_injector([](ledger::Mempool& pool) {
    for (auto& tx : pool.pending())
      if (tx.kind == ledger::RecordKind::training_model && tx.author == 1) {
        tx.payload[12] ^= 0x10;
        break;
      }
  });
  const auto act = action_for({0, 1, 2, 0, 1, 2}, 3, 2);
  const auto c = clean.step(act);
  const auto d = dirty.step(act);
  CHECK(c.models_aggregated == 3);
  CHECK(d.models_aggregated == 2);
  CHECK(d.invalid_txs == 1);
  CHECK(d.block_accepted);
  CHECK(dirty.global_model() != clean.global_model());
}

TEST_CASE("encoding, actor mapping and dimensions") {
  auto env = make_env(4, 2, 3);
  const auto s = env.reset(0);
  CHECK(env.state_dim() == 2 * 2 + 4 + 2 * 3);
  CHECK(env.action_dim() == 2 * 4 + 3);
  const auto x = env.encode(s);
  CHECK(x.size() == env.state_dim());
  for (double v : x) CHECK(std::isfinite(v));

  std::vector<double> lo(env.action_dim(), -1.0), hi(env.action_dim(), 1.0);
  const auto a = env.from_actor(lo), b = env.from_actor(hi);
  CHECK(a.batch_fracs[0] == env.config().b_min);
  CHECK(b.batch_fracs[0] == env.config().b_max);
  CHECK(a.bandwidth_shares[0] == env.config().tau_floor);
  CHECK(b.bandwidth_shares[0] == 1.0);
  CHECK(a.assoc_scores[0] == -1.0);
  CHECK_THROWS_AS(env.from_actor(std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("episodes are reproducible and trajectories are dumped") {
  auto run = [](std::ostringstream* sink) {
    auto env = make_env(5, 2, 2);
    if (sink != nullptr) env.set_trajectory_sink(sink);
    env.reset(9);
    Rng rng(4);
    std::vector<double> costs;
    for (bool done = false; !done;) {
      auto o = env.step(random_raw(env.bounds(), rng));
      costs.push_back(o.breakdown.t_iteration);
      done = o.done;
    }
    return costs;
  };
  std::ostringstream log;
  CHECK(run(&log) == run(nullptr));
  std::istringstream in(log.str());
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  CHECK(line.rfind("episode,step,K0,K1", 0) == 0);
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("config validation") {
  EnvConfig cfg;
  cfg.b_min = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EnvConfig{};
  cfg.b_max = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EnvConfig{};
  cfg.horizon = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
