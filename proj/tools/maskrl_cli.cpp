#include "maskrl/ablate.hpp"
#include "maskrl/config.hpp"
#include "maskrl/reward_net.hpp"
#include "maskrl/rollout.hpp"
#include "maskrl/tasks.hpp"
#include "maskrl/train.hpp"
#include "maskrl/verify.hpp"

#include <CLI11.hpp>

#include <unistd.h>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitRewardService = 3;

int run_train(const std::string& config_path, std::int64_t seed,
              int steps, const std::string& reward_server) {
  using namespace maskrl;
  harness::RunConfig cfg = config_path.empty()
                               ? harness::RunConfig{}
                               : harness::load_config(config_path);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (steps >= 0) cfg.steps = steps;
  if (!reward_server.empty()) cfg.reward_server = reward_server;
  harness::validate_config(cfg);

  harness::Trainer trainer(cfg);
  const auto metrics = trainer.run();
  std::cout << "trained " << trainer.step() << " steps\n"
            << "metrics: " << metrics << "\n"
            << "checkpoint: " << cfg.checkpoint_path << "\n";
  return kExitOk;
}

int run_verify(const std::string& report_path) {
  const auto results = maskrl::harness::verify();
  for (const auto& r : results)
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " ("
              << r.seconds << "s): " << r.detail << "\n";
  const auto report = maskrl::harness::verify_report_json(results);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << report << "\n";
  } else {
    std::cout << report << "\n";
  }
  return maskrl::harness::all_passed(results) ? kExitOk : kExitNumerical;
}

int run_sample(const std::string& checkpoint_path, const std::string& task_name,
               int n, std::int64_t seed) {
  using namespace maskrl;
  const auto vocab = Vocabulary::standard();
  const auto ckpt = policy::load_checkpoint(checkpoint_path);
  const auto task = harness::make_task(task_name);

  Rng rng(seed >= 0 ? static_cast<std::uint64_t>(seed) : ckpt.seed + 1);
  Rng inst_rng = rng.split(0);
  const auto inst = harness::task_generate(task, vocab, inst_rng);

  const DiffusionSchedule schedule{64};
  Rng gen_rng = rng.split(1);
  const auto group = rollout::sample_group(
      ckpt.params, vocab, inst.x, n, schedule,
      static_cast<std::size_t>(task.max_response_len), gen_rng);

  std::cout << "prompt: " << vocab.detokenize(inst.x) << "\n";
  if (task.kind == harness::TaskKind::ModSum)
    std::cout << "target: " << vocab.detokenize(inst.answer) << "\n";
  else
    std::cout << "target: [" << inst.interval.first << ", "
              << inst.interval.second << "]\n";
  for (const auto& s : group.samples) {
    const double r = harness::key_reward(task, vocab, inst, s.y);
    std::cout << "reward " << r << "  " << vocab.detokenize(s.y) << "\n";
  }
  return kExitOk;
}

int run_ablate(const std::string& grid_path, const std::string& out_csv) {
  using namespace maskrl::harness;
  RunConfig base;
  const auto grid = load_ablation_grid(grid_path, base);
  const auto path = ablation_run(base, grid, out_csv);
  std::cout << "comparison csv: " << path << "\n";
  return kExitOk;
}

int run_serve(int port) {
  using namespace maskrl;
  const auto vocab = Vocabulary::standard();
  reward_net::RewardServer server(vocab, port);
  std::cout << "reward server listening on 127.0.0.1:" << server.port()
            << std::endl;
  // Foreground service; terminated externally.
  for (;;) pause();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"post-training harness for masked-diffusion sequence models"};
  app.require_subcommand(1);

  std::string config_path, reward_server, report_path;
  std::int64_t seed = -1;
  int steps = -1;
  auto* train = app.add_subcommand("train", "run the training loop");
  train->add_option("--config", config_path, "config JSON path");
  train->add_option("--seed", seed, "override config seed");
  train->add_option("--steps", steps, "override step budget");
  train->add_option("--reward-server", reward_server,
                    "host:port of a reward service");

  auto* verify = app.add_subcommand("verify", "run the oracle suites");
  verify->add_option("--report", report_path, "write the JSON report here");

  std::string checkpoint_path, task_name = "modsum";
  int n = 4;
  std::int64_t sample_seed = -1;
  auto* sample = app.add_subcommand("sample", "sample from a checkpoint");
  sample->add_option("--checkpoint", checkpoint_path, "checkpoint path")
      ->required();
  sample->add_option("--task", task_name, "task name");
  sample->add_option("--n", n, "samples to draw");
  sample->add_option("--seed", sample_seed, "sampling seed");

  std::string grid_path, out_csv = "ablation.csv";
  auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
  ablate->add_option("--grid", grid_path, "grid JSON path")->required();
  ablate->add_option("--out", out_csv, "comparison CSV path");

  int port = 7777;
  auto* serve = app.add_subcommand("serve-reward", "run the reference reward server");
  serve->add_option("--port", port, "listen port (0 = ephemeral)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return run_train(config_path, seed, steps, reward_server);
    if (verify->parsed()) return run_verify(report_path);
    if (sample->parsed())
      return run_sample(checkpoint_path, task_name, n, sample_seed);
    if (ablate->parsed()) return run_ablate(grid_path, out_csv);
    if (serve->parsed()) return run_serve(port);
  } catch (const maskrl::harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const maskrl::harness::NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << " (batch dumped to "
              << e.dump_path << ")\n";
    return kExitNumerical;
  } catch (const maskrl::reward_net::RewardServiceError& e) {
    std::cerr << "reward service failure: " << e.what() << "\n";
    return kExitRewardService;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
