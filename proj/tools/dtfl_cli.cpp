#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dtfl/harness.hpp"

namespace {

struct Common {
  std::string config = "configs/desk.json";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> episodes;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--episodes", c.episodes, "number of episodes");
  cmd->add_flag("--quiet", c.quiet, "suppress progress output");
}

dtfl::harness::ExperimentConfig load(const Common& c) {
  auto cfg = dtfl::harness::load_experiment(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.episodes) cfg.episodes = *c.episodes;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

void report(const dtfl::harness::RunSummary& s, const dtfl::harness::ExperimentConfig& cfg) {
  if (!s.cumulative_cost.empty())
    std::cout << "final cumulative average cost: " << s.cumulative_cost.back() << " s\n";
  if (s.evaluated) {
    std::cout << "median iteration time (s): learned " << s.median_learned << ", random " << s.median_random
              << ", average " << s.median_average << "\n";
  }
  std::cout << "outputs in " << cfg.output_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital-twin federated learning latency simulator"};
  app.require_subcommand(1);

  Common train_opts, base_opts, sweep_opts, check_opts, replay_opts;
  auto* train = app.add_subcommand("train", "train the multi-agent policy and evaluate it against baselines");
  add_common(train, train_opts);

  auto* baseline = app.add_subcommand("baseline", "run a fixed baseline policy");
  add_common(baseline, base_opts);
  std::string kind = "random";
  baseline->add_option("--kind", kind, "random | average")->check(CLI::IsMember({"random", "average"}));

  auto* sweep = app.add_subcommand("sweep", "train once per discount factor");
  add_common(sweep, sweep_opts);
  std::vector<double> gammas;
  sweep->add_option("--gamma", gammas, "discount factors")->check(CLI::Range(0.0, 1.0));

  auto* validate = app.add_subcommand("validate-config", "parse and check a config file");
  add_common(validate, check_opts);

  auto* replay = app.add_subcommand("replay", "evaluate a saved checkpoint");
  add_common(replay, replay_opts);
  std::string checkpoint;
  replay->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    using namespace dtfl::harness;
    if (*train) {
      auto cfg = load(train_opts);
      cfg.policy = PolicyKind::learned;
      report(run_experiment(cfg, cfg.output_dir, train_opts.quiet), cfg);
    } else if (*baseline) {
      auto cfg = load(base_opts);
      cfg.policy = parse_policy_kind(kind);
      report(run_experiment(cfg, cfg.output_dir, base_opts.quiet), cfg);
    } else if (*sweep) {
      auto cfg = load(sweep_opts);
      if (gammas.empty()) gammas = cfg.gamma_sweep;
      if (gammas.empty()) throw dtfl::ConfigError("no discount factors: pass --gamma or set gamma_sweep");
      const auto runs = gamma_sweep(cfg, gammas, cfg.output_dir, sweep_opts.quiet);
      for (std::size_t k = 0; k < runs.size(); ++k)
        if (!runs[k].cumulative_cost.empty())
          std::cout << "gamma " << gammas[k] << ": final cumulative average cost "
                    << runs[k].cumulative_cost.back() << " s\n";
      std::cout << "outputs in " << cfg.output_dir.string() << "\n";
    } else if (*validate) {
      const auto cfg = load(check_opts);
      const auto env = make_environment(cfg);
      std::cout << "ok: " << env.num_agents() << " BSs, " << env.num_twins() << " twins, state dim "
                << env.state_dim() << ", action dim " << env.action_dim() << "\n"
                << "config digest " << dtfl::to_hex(config_digest(cfg)) << "\n";
    } else if (*replay) {
      auto cfg = load(replay_opts);
      report(replay_checkpoint(cfg, checkpoint, cfg.output_dir), cfg);
    }
  } catch (const dtfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dtfl::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
