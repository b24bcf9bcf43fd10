#include "maskrl/ablate.hpp"
#include "maskrl/config.hpp"
#include "maskrl/engine.hpp"
#include "maskrl/tasks.hpp"
#include "maskrl/train.hpp"
#include "maskrl/verify.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

using namespace maskrl;
using harness::RunConfig;

namespace {

RunConfig tiny_config(const std::string& tag) {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.dim = 16;
  cfg.diffusion_steps = 8;
  cfg.restart_steps = {0, 2};
  cfg.group_size = 4;
  cfg.steps = 6;
  cfg.sft_corpus_size = 32;
  cfg.checkpoint_every = 0;
  cfg.metrics_path = "test_metrics_" + tag + ".csv";
  cfg.checkpoint_path = "test_ckpt_" + tag + ".json";
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void cleanup(const RunConfig& cfg) {
  std::remove(cfg.metrics_path.c_str());
  std::remove((cfg.metrics_path + ".meta.json").c_str());
  std::remove(cfg.checkpoint_path.c_str());
}

}  // namespace

TEST_CASE("task generation and demonstrations") {
  const auto vocab = Vocabulary::standard();
  const auto modsum = harness::make_task("modsum");
  const auto interval = harness::make_task("interval");
  CHECK_THROWS_AS(harness::make_task("what"), std::invalid_argument);

  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Rng r = rng.split(i);
    const auto mi = harness::task_generate(modsum, vocab, r);
    REQUIRE(mi.x.size() == 5);
    const int sum = vocab.digit_value(mi.x[0]) + vocab.digit_value(mi.x[2]) +
                    vocab.digit_value(mi.x[4]);
    CHECK(mi.answer == Sequence{vocab.digit(sum % 10)});

    const auto demo = harness::sft_response(modsum, vocab, mi, r);
    CHECK(demo.size() == 12);
    CHECK(harness::key_reward(modsum, vocab, mi, demo) == 1.0);
    CHECK(rewards::format_reward(vocab, demo) == 1.0);

    const auto ii = harness::task_generate(interval, vocab, r);
    REQUIRE(ii.x.size() == 2);
    CHECK(ii.interval.second <= 15);
    CHECK(ii.interval.first <= ii.interval.second);
    const auto idemo = harness::sft_response(interval, vocab, ii, r);
    CHECK(harness::key_reward(interval, vocab, ii, idemo) == 1.0);
  }
  // Frozen examples.
  CHECK((3 + 4 + 5) % 10 == 2);
  CHECK((0 + 0 + 0) % 10 == 0);
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
  CHECK_THROWS_AS(harness::config_from_json_text("{\"bogus\": 1}"),
                  harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json_text("not json"),
                  harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json_text("{\"gamma\": 1.5}"),
                  harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json_text("{\"estimator\": \"x\"}"),
                  harness::ConfigError);
  CHECK_THROWS_AS(
      harness::config_from_json_text("{\"restart_steps\": [1, 2]}"),
      harness::ConfigError);

  const auto cfg = harness::config_from_json_text(
      "{\"seed\": 3, \"gamma\": 0.25, \"tasks\": [\"interval\"]}");
  CHECK(cfg.seed == 3);
  CHECK(cfg.gamma == 0.25);
  CHECK(cfg.tasks == std::vector<std::string>{"interval"});

  // Round trip through the serializer.
  const auto again =
      harness::config_from_json_text(harness::config_to_json_text(cfg));
  CHECK(again.gamma == cfg.gamma);
  CHECK(again.seed == cfg.seed);
}

TEST_CASE("engine: pure sft and pure online batches") {
  const auto vocab = Vocabulary::standard();
  auto cfg = tiny_config("engine");
  policy::PolicyConfig pc;
  pc.vocab_size = vocab.size();
  pc.dim = cfg.dim;
  pc.max_ctx = cfg.max_ctx;
  Rng root(cfg.seed);
  Rng init = root.split(0);
  const auto params = policy::PolicyParams::init(pc, init);

  SUBCASE("sft_ratio 1 yields offline items with unit weight") {
    cfg.sft_ratio = 1.0;
    harness::DataEngine engine(cfg, vocab, root.split(1));
    Rng rng(5);
    const auto batch = engine.next_batch(params, rng);
    CHECK(batch.task == "sft");
    REQUIRE(batch.items.size() == 4);
    for (const auto& item : batch.items) {
      CHECK(item.advantage == 1.0);
      CHECK(item.source == objectives::SampleSource::OfflineSft);
    }
  }
  SUBCASE("sft_ratio 0 yields groups with aggregated advantages") {
    cfg.sft_ratio = 0.0;
    harness::DataEngine engine(cfg, vocab, root.split(1));
    Rng rng(6);
    const auto batch = engine.next_batch(params, rng);
    CHECK(batch.task == "modsum");
    REQUIRE(batch.items.size() == 4);
    // gamma-weighted distill + grpo: subtracting the distill part must
    // leave a zero-sum grpo component.
    CHECK(std::abs(batch.adv_grpo_sum) <= 1e-9 * 4);
  }
  SUBCASE("long-run source frequencies match the ratio") {
    cfg.sft_ratio = 0.3;
    cfg.group_size = 2;
    cfg.diffusion_steps = 4;
    harness::DataEngine engine(cfg, vocab, root.split(1));
    int sft = 0;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
      Rng rng = Rng(100).split(i);
      sft += engine.next_batch(params, rng).task == "sft" ? 1 : 0;
    }
    const double frac = static_cast<double>(sft) / n;
    CHECK(std::abs(frac - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / n));
  }
}

TEST_CASE("trainer: zero-step budget keeps the initialization") {
  auto cfg = tiny_config("zero");
  cfg.steps = 0;
  harness::Trainer t(cfg);
  const auto before = t.params().w.embed.data;
  t.run();
  const auto loaded = policy::load_checkpoint(cfg.checkpoint_path);
  CHECK(loaded.params.w.embed.data == before);
  CHECK(loaded.step == 0);
  cleanup(cfg);
}

TEST_CASE("trainer: same seed gives byte-identical metrics") {
  auto a = tiny_config("det_a");
  auto b = tiny_config("det_b");
  b.checkpoint_path = "test_ckpt_det_b.json";
  harness::Trainer ta(a);
  ta.run();
  harness::Trainer tb(b);
  tb.run();
  const auto ma = slurp(a.metrics_path);
  CHECK(!ma.empty());
  CHECK(ma == slurp(b.metrics_path));
  // Parameters agree bit-for-bit as well.
  CHECK(ta.params().w.embed.data == tb.params().w.embed.data);
  cleanup(a);
  cleanup(b);
}

TEST_CASE("trainer: checkpoint resume replays the uninterrupted run") {
  auto full = tiny_config("full");
  full.steps = 6;
  harness::Trainer tf(full);
  tf.run();

  auto half = tiny_config("half");
  half.steps = 3;
  harness::Trainer th(half);
  th.run();
  const auto ckpt = policy::load_checkpoint(half.checkpoint_path);
  CHECK(ckpt.step == 3);

  auto rest = tiny_config("rest");
  rest.steps = 6;
  harness::Trainer tr(rest, ckpt);
  while (tr.step() < 6) tr.run_step();
  CHECK(tr.params().w.embed.data == tf.params().w.embed.data);
  CHECK(tr.params().w.wout.data == tf.params().w.wout.data);
  cleanup(full);
  cleanup(half);
  cleanup(rest);
}

TEST_CASE("trainer: metrics header is fixed and rows parse") {
  auto cfg = tiny_config("hdr");
  cfg.steps = 3;
  harness::Trainer t(cfg);
  t.run();
  std::ifstream in(cfg.metrics_path);
  std::string line;
  std::getline(in, line);
  CHECK(line == harness::Trainer::metrics_header());
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    int commas = 0;
    for (char ch : line) commas += ch == ',' ? 1 : 0;
    CHECK(commas == 12);
  }
  CHECK(rows == 3);
  cleanup(cfg);
}

TEST_CASE("verify passes clean and fails under the corrupted fixture") {
  harness::VerifyOptions opts;
  const auto results = harness::verify(opts);
  CHECK(results.size() == 6);
  CHECK(harness::all_passed(results));

  harness::VerifyOptions corrupt;
  corrupt.corrupt_gradient = true;
  const auto bad = harness::verify(corrupt);
  bool fd_failed = false;
  for (const auto& r : bad) {
    if (r.name == "finite_differences") fd_failed = !r.passed;
    else CHECK(r.passed);
  }
  CHECK(fd_failed);

  const auto report = harness::verify_report_json(results);
  CHECK(report.find("finite_differences") != std::string::npos);
  CHECK(report.find("seconds") != std::string::npos);
}

TEST_CASE("ablation grid runs configs and merges the comparison csv") {
  RunConfig base = tiny_config("abl");
  base.steps = 2;
  std::vector<harness::AblationSpec> grid = {
      {"g0", "{\"gamma\": 0.0}"},
      {"g1", "{\"gamma\": 1.0}"},
  };
  const std::string out = "test_ablation.csv";
  harness::ablation_run(base, grid, out);
  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "config," + harness::Trainer::metrics_header());
  int g0 = 0, g1 = 0;
  while (std::getline(in, line)) {
    if (line.rfind("g0,", 0) == 0) ++g0;
    if (line.rfind("g1,", 0) == 0) ++g1;
  }
  CHECK(g0 == 2);
  CHECK(g1 == 2);
  for (const auto& spec : grid) {
    std::remove((out + "." + spec.name + ".metrics.csv").c_str());
    std::remove((out + "." + spec.name + ".metrics.csv.meta.json").c_str());
    std::remove((out + "." + spec.name + ".checkpoint.json").c_str());
  }
  std::remove(out.c_str());

  CHECK_THROWS_AS(harness::apply_overrides(base, "{\"nope\": 1}"),
                  harness::ConfigError);
}
