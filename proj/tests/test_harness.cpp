#include <doctest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "dtfl/harness.hpp"
#include "support.hpp"

#ifndef DTFL_TEST_DATA_DIR
#define DTFL_TEST_DATA_DIR "."
#endif

using namespace dtfl;
using namespace dtfl::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(std::size_t episodes = 2) {
  ExperimentConfig c;
  c.network = testing::small_config(5, 2, 2, 2);
  c.env.horizon = 3;
  c.env.fl.holdout_size = 40;
  c.agent.hidden = {8};
  c.agent.batch_size = 4;
  c.agent.replay_capacity = 100;
  c.episodes = episodes;
  c.eval_episodes = 2;
  c.seed = 5;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dtfl_unit_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("cumulative average reward examples") {
  std::vector<std::vector<double>> one{{-2.0, -2.0}};
  CHECK(cumulative_average_reward(one) == std::vector<double>{-2.0});
  std::vector<std::vector<double>> two{{-2.0, -2.0}, {-1.0, -1.0}};
  CHECK(cumulative_average_reward(two)[1] == -1.5);
  std::vector<std::vector<double>> flat(6, {-0.7, -0.7, -0.7});
  for (double r : cumulative_average_reward(flat)) CHECK(r == doctest::Approx(-0.7).epsilon(1e-15));
  CHECK_THROWS_AS(cumulative_average_reward(std::span<const std::vector<double>>{}), std::invalid_argument);
}

TEST_CASE("property: R_n equals a brute-force recomputation") {
  Rng rng(12);
  std::normal_distribution<double> g(-50.0, 20.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t E = 1 + trial * 7, M = 1 + trial % 5;
    std::vector<std::vector<double>> r(E, std::vector<double>(M));
    for (auto& row : r)
      for (double& v : row) v = g(rng);
    const auto series = cumulative_average_reward(r);
    REQUIRE(series.size() == E);
    for (std::size_t n = 1; n <= E; ++n) {
      long double sum = 0.0L;
      for (std::size_t t = 0; t < n; ++t)
        for (double v : r[t]) sum += v;
      const double brute = static_cast<double>(sum / static_cast<long double>(n * M));
      CHECK(std::abs(series[n - 1] - brute) <= 1e-12 * std::max(1.0, std::abs(brute)));
    }
  }
}

TEST_CASE("average baseline split, remainder rule and exact tau") {
  for (std::size_t twins : {10u, 11u}) {
    ExperimentConfig c = tiny();
    c.network = testing::small_config(twins, 5, 3, 2);
    auto env = make_environment(c);
    const auto s = env.reset(0);
    const auto act = average_policy()(env, s);
    const auto d = env::decode(env::project_action(act, env.bounds()), env.bounds());
    const auto k = twin_counts(d.assoc);
    if (twins == 10)
      CHECK(k == std::vector<std::size_t>{2, 2, 2, 2, 2});
    else
      CHECK(k == std::vector<std::size_t>{3, 2, 2, 2, 2});
    for (std::size_t ch = 0; ch < 3; ++ch) CHECK(d.alloc.column_sum(ch) == 1.0);
    for (double b : d.batch_fracs) CHECK(b == 0.5 * (c.env.b_min + c.env.b_max));
  }
}

TEST_CASE("random baseline: uniform association and reproducible") {
  ExperimentConfig c = tiny();
  c.network = testing::small_config(1, 5, 2, 2);
  auto env = make_environment(c);
  const auto s = env.reset(0);
  auto p = random_policy(3);
  std::vector<double> counts(5, 0.0);
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const auto d = env::decode(env::project_action(p(env, s), env.bounds()), env.bounds());
    counts[*d.assoc.bs_of(0)] += 1.0;
    REQUIRE(env::feasible(d, env.bounds()));
  }
  const double sigma = std::sqrt(n * 0.2 * 0.8);
  for (double c5 : counts) CHECK(std::abs(c5 - n * 0.2) <= 3.0 * sigma);

  auto a = random_policy(9), b = random_policy(9);
  for (int k = 0; k < 5; ++k) {
    const auto x = a(env, s), y = b(env, s);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].bandwidth_shares == y[i].bandwidth_shares);
  }
}

TEST_CASE("baselines stay feasible and a single BS leaves nothing to choose") {
  ExperimentConfig c = tiny();
  auto env = make_environment(c);
  auto rnd = random_policy(1);
  auto avg = average_policy();
  for (int k = 0; k < 50; ++k) {
    const auto s = env.reset(k);
    for (const auto* p : {&rnd, &avg}) {
      const auto d = env::decode(env::project_action((*p)(env, s), env.bounds()), env.bounds());
      CHECK(env::feasible(d, env.bounds()));
    }
  }

  ExperimentConfig single = tiny();
  single.network = testing::small_config(4, 1, 2, 1);
  auto e1 = make_environment(single), e2 = make_environment(single);
  auto agents = make_agents(single, e1);
  auto rnd1 = random_policy(7);
  auto learned = learned_policy(agents);
  const auto r = run_policy(e1, rnd1, 2, 0);
  const auto l = run_policy(e2, learned, 2, 0);
  // Only batch fractions differ; the association is forced.
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t t = 0; t < r[e].t_iteration.size(); ++t) CHECK(std::isfinite(l[e].t_iteration[t]));
  auto avg1 = average_policy();
  auto e3 = make_environment(single);
  const auto s = e3.reset(0);
  const auto d1 = env::decode(env::project_action(avg1(e3, s), e3.bounds()), e3.bounds());
  const auto d2 = env::decode(env::project_action(rnd1(e3, s), e3.bounds()), e3.bounds());
  CHECK(d1.assoc == d2.assoc);
  CHECK(d1.alloc.tau == d2.alloc.tau);
}

TEST_CASE("config parsing") {
  const auto j = nlohmann::json::parse(R"({
    "network": {"num_users": 6, "num_bs": 2, "num_subchannels": 2, "num_producers": 1,
                "bs_cpu_freq_hz": [1e9, 2e9]},
    "env": {"horizon": 7, "theta_global": 0.9},
    "fl": {"learning_rate": 0.3},
    "ledger": {"quorum": 0.6},
    "maddpg": {"hidden": [32], "gamma": 0.5, "optimizer": "momentum", "ou_sigma_decay": 0.9},
    "episodes": 3, "policy": "random", "gamma_sweep": [0.5], "seed": 42})");
  const auto c = parse_experiment(j);
  CHECK(c.network.num_bs == 2);
  CHECK(c.env.horizon == 7);
  CHECK(c.env.fl.learning_rate == 0.3);
  CHECK(c.env.ledger.quorum == 0.6);
  CHECK(c.agent.hidden == std::vector<std::size_t>{32});
  CHECK(c.agent.optimizer.kind == maddpg::OptimizerKind::momentum);
  CHECK(c.agent.ou.sigma_decay == 0.9);
  CHECK(c.policy == PolicyKind::random);
  CHECK(c.seed == 42);

  const auto round_trip = parse_experiment(to_json(c));
  CHECK(config_digest(round_trip) == config_digest(c));
  auto moved = c;
  moved.output_dir = "elsewhere";
  CHECK(config_digest(moved) == config_digest(c));
  auto changed = c;
  changed.agent.gamma = 0.6;
  CHECK(config_digest(changed) != config_digest(c));

  CHECK_THROWS_AS(parse_experiment(nlohmann::json::parse(R"({"episodes": 3, "epsiodes": 4})")), ConfigError);
  CHECK_THROWS_AS(parse_experiment(nlohmann::json::parse(R"({"maddpg": {"gama": 0.5}})")), ConfigError);
  CHECK_THROWS_AS(parse_experiment(nlohmann::json::parse(R"({"gamma_sweep": [1.5]})")), ConfigError);
  CHECK_THROWS_AS(parse_experiment(nlohmann::json::parse(R"({"policy": "greedy"})")), ConfigError);
  CHECK_THROWS_AS(parse_experiment(nlohmann::json::parse(R"({"network": "missing.json"})")), ConfigError);

  const auto dir = scratch("netfile");
  fs::create_directories(dir);
  std::ofstream(dir / "net.json") << R"({"num_bs": 2, "bs_cpu_freq_hz": [1e9, 1e9], "num_producers": 2})";
  const auto by_path = parse_experiment(nlohmann::json::parse(R"({"network": "net.json"})"), dir);
  CHECK(by_path.network.num_bs == 2);
}

TEST_CASE("shipped configs load and validate") {
  for (const char* name : {"desk.json", "paper.json"}) {
    const auto c = load_experiment(fs::path(DTFL_SOURCE_DIR) / "configs" / name);
    CHECK_NOTHROW(c.validate());
    CHECK(c.network.num_bs == 5);
    CHECK(c.network.bs_cpu_freq_hz == std::vector<double>{2.6e9, 1.8e9, 3.6e9, 2.4e9, 2.4e9});
  }
}

TEST_CASE("zero episodes give header-only CSVs") {
  const auto dir = scratch("empty");
  const auto summary = run_experiment(tiny(0), dir);
  CHECK(summary.history.empty());
  for (const char* f : {"metrics.csv", "latency_rounds.csv", "latency_episodes.csv", "loss_rounds.csv",
                        "cumulative_cost.csv", "timing.csv"}) {
    const auto text = slurp(dir / f);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  }
}

TEST_CASE("CSV schema, determinism and the golden run") {
  const auto a = scratch("run_a"), b = scratch("run_b");
  const auto sa = run_experiment(tiny(), a);
  run_experiment(tiny(), b);
  CHECK(first_line(a / "metrics.csv") ==
        "episode,mean_iteration_time,episode_reward,cumulative_avg_reward,global_loss,critic_loss,actor_objective");
  CHECK(first_line(a / "latency_rounds.csv") == "episode,round,t_iteration");
  CHECK(first_line(a / "latency_episodes.csv") == "episode,mean_t_iteration,median_t_iteration");
  CHECK(first_line(a / "loss_rounds.csv") == "episode,round,global_loss");
  CHECK(first_line(a / "cumulative_cost.csv") == "episode,cumulative_avg_cost");
  CHECK(first_line(a / "timing.csv") == "episode,round,seconds");
  CHECK(first_line(a / "eval.csv") == "policy,episode,round,t_iteration");
  for (const char* f : {"metrics.csv", "latency_rounds.csv", "latency_episodes.csv", "loss_rounds.csv",
                        "cumulative_cost.csv", "eval.csv", "model.ckpt", "summary.txt"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  CHECK(sa.evaluated);
  CHECK(sa.median_learned > 0.0);

  const fs::path golden = fs::path(DTFL_TEST_DATA_DIR) / "golden" / "tiny_metrics.csv";
  if (std::getenv("DTFL_UPDATE_GOLDEN") != nullptr) {
    fs::create_directories(golden.parent_path());
    fs::copy_file(a / "metrics.csv", golden, fs::copy_options::overwrite_existing);
  }
  CHECK(slurp(a / "metrics.csv") == slurp(golden));

  // R_n in metrics.csv agrees with the rewards it reports.
  std::ifstream in(a / "metrics.csv");
  std::string line;
  std::getline(in, line);
  double total = 0.0;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    std::stringstream ss(line);
    std::vector<double> cells;
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(std::stod(cell));
    total += cells[2];
    CHECK(cells[3] == doctest::Approx(total / (n * 2.0)).epsilon(1e-10));
  }
}

TEST_CASE("single-gamma sweep matches a plain run") {
  auto c = tiny();
  c.agent.gamma = 0.5;
  const auto plain = run_experiment(c, scratch("plain"));
  const std::vector<double> g{0.5};
  const auto dir = scratch("sweep");
  const auto sweep = gamma_sweep(c, g, dir);
  REQUIRE(sweep.size() == 1);
  CHECK(sweep[0].cumulative_cost == plain.cumulative_cost);
  CHECK(first_line(dir / "sweep_cost.csv").find("gamma_0.5") != std::string::npos);
}

TEST_CASE("checkpoint replay reproduces the evaluation") {
  const auto dir = scratch("replay_src");
  const auto s = run_experiment(tiny(), dir);
  const auto r = replay_checkpoint(tiny(), dir / "model.ckpt", scratch("replay_out"));
  CHECK(r.median_learned == s.median_learned);
  auto other = tiny();
  other.agent.gamma = 0.3;
  CHECK_THROWS(replay_checkpoint(other, dir / "model.ckpt", scratch("replay_bad")));
}

TEST_CASE("median iteration time") {
  std::vector<maddpg::EpisodeRecord> h(2);
  h[0].t_iteration = {3.0, 1.0};
  h[1].t_iteration = {2.0};
  CHECK(median_iteration_time(h) == 2.0);
  h[1].t_iteration.push_back(4.0);
  CHECK(median_iteration_time(h) == 2.5);
}
