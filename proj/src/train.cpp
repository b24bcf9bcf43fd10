#include "maskrl/train.hpp"

#include "maskrl/rollout.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <sstream>

namespace maskrl::harness {

namespace {

// Root stream tags.
constexpr std::uint64_t kInitTag = 0x696e6974;    // parameter init
constexpr std::uint64_t kCorpusTag = 0x636f7270;  // offline corpus
constexpr std::uint64_t kStepTag = 0x73746570;    // per-step streams

// Per-step subtags.
constexpr std::uint64_t kBatchTag = 0;
constexpr std::uint64_t kLossTag = 1;

std::string host_of(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos)
    throw ConfigError("reward_server must be host:port");
  return addr.substr(0, colon);
}

int port_of(const std::string& addr) {
  const auto colon = addr.rfind(':');
  try {
    return std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("reward_server must be host:port");
  }
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg)
    : cfg_(cfg), vocab_(Vocabulary::standard()) {
  validate_config(cfg_);
  Rng root(cfg_.seed);

  policy::PolicyConfig pc;
  pc.vocab_size = vocab_.size();
  pc.dim = cfg_.dim;
  pc.layers = cfg_.layers;
  pc.max_ctx = cfg_.max_ctx;
  Rng init_rng = root.split(kInitTag);
  params_ = policy::PolicyParams::init(pc, init_rng);
  grads_ = policy::GradientBuffer::zeros(pc);
  adam_ = policy::AdamState::init(pc, cfg_.learning_rate, cfg_.weight_decay);

  engine_ = std::make_unique<DataEngine>(cfg_, vocab_, root.split(kCorpusTag));
  if (!cfg_.reward_server.empty()) {
    client_ = std::make_unique<reward_net::RewardClient>(
        host_of(cfg_.reward_server), port_of(cfg_.reward_server));
    engine_->set_reward_client(client_.get());
  }
  if (cfg_.kl_beta > 0.0) {
    kl_ref_ = std::make_unique<policy::PolicyParams>(
        policy::snapshot(params_));
    engine_->set_kl_reference(kl_ref_.get());
  }
}

Trainer::Trainer(const RunConfig& cfg, const policy::Checkpoint& resume)
    : Trainer(cfg) {
  if (resume.params.cfg.hash() != params_.cfg.hash())
    throw ConfigError("checkpoint does not match run config");
  params_ = resume.params;
  adam_ = resume.adam;
  step_ = resume.step;
}

Trainer::~Trainer() = default;

StepRecord Trainer::run_step() {
  Rng root(cfg_.seed);
  Rng step_rng = root.split(kStepTag).split(static_cast<std::uint64_t>(step_));

  StepRecord rec;
  rec.step = step_;

  const bool force_sft = step_ < cfg_.stage1_steps;
  int attempts = 0;
  for (;;) {
    Rng batch_rng = step_rng.split(kBatchTag).split(attempts);
    try {
      rec.batch = engine_->next_batch(params_, batch_rng, force_sft);
      break;
    } catch (const reward_net::RewardServiceError&) {
      // Skip the group rather than zero-filling; a fresh batch replaces it.
      if (++attempts > cfg_.batch_retries) throw;
    }
  }

  Rng loss_rng = step_rng.split(kLossTag);
  double objective = 0.0;
  try {
    objective = objectives::unified_loss(
        rec.batch.items, params_, vocab_, cfg_.estimator_enum(), loss_rng,
        &grads_, cfg_.length_normalize);
    if (grads_.samples == 0) {
      // All-zero advantages accumulate nothing; the optimizer still
      // expects a step, so feed it the explicit zero gradient.
      grads_.samples = rec.batch.items.size();
    }
    policy::optimizer_step(params_, grads_, adam_);
  } catch (const std::runtime_error& e) {
    dump_abort(rec.batch);
    throw NumericalAbort(e.what(), cfg_.metrics_path + ".abort.jsonl");
  }
  rec.loss = -objective;
  step_ += 1;
  return rec;
}

const std::string& Trainer::metrics_header() {
  static const std::string header =
      "step,task,mean_key_reward,mean_key_sampled,mean_combined_reward,loss,adv_mean,adv_min,"
      "adv_max,adv_grpo_sum,forced_count,expansion_best,kl_mean";
  return header;
}

void Trainer::write_metrics_row(const StepRecord& rec,
                                std::ofstream& out) const {
  std::ostringstream row;
  row.precision(17);
  row << rec.step << ',' << rec.batch.task << ',' << rec.batch.mean_key_reward
      << ',' << rec.batch.mean_key_sampled << ',' << rec.batch.mean_combined_reward
      << ',' << rec.loss << ','
      << rec.batch.adv_mean << ',' << rec.batch.adv_min << ','
      << rec.batch.adv_max << ',' << rec.batch.adv_grpo_sum << ','
      << rec.batch.forced_count << ',';
  if (!rec.batch.expansion_max.empty()) {
    for (std::size_t i = 0; i < rec.batch.expansion_max.size(); ++i) {
      if (i) row << '|';
      row << rec.batch.expansion_max[i];
    }
  }
  row << ',' << rec.batch.kl_mean;
  out << row.str() << "\n";
}

void Trainer::dump_abort(const BatchResult& batch) const {
  std::ofstream dump(cfg_.metrics_path + ".abort.jsonl");
  if (!batch.group.samples.empty()) {
    rollout::dump_group_jsonl(dump, batch.group);
  } else {
    rollout::Group g;
    for (const auto& item : batch.items) {
      objectives::GroupSample s;
      s.y = item.y;
      s.source = item.source;
      g.x = item.x;
      g.samples.push_back(std::move(s));
    }
    rollout::dump_group_jsonl(dump, g);
  }
}

std::string Trainer::run() {
  const auto wall_start = std::chrono::steady_clock::now();

  std::ofstream metrics(cfg_.metrics_path);
  if (!metrics) throw ConfigError("cannot write metrics: " + cfg_.metrics_path);
  metrics << metrics_header() << "\n";

  while (step_ < cfg_.steps) {
    const auto rec = run_step();
    write_metrics_row(rec, metrics);
    if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0)
      policy::save_checkpoint(cfg_.checkpoint_path, checkpoint());
  }
  metrics.flush();
  policy::save_checkpoint(cfg_.checkpoint_path, checkpoint());

  // Wall clock and the resolved config live in a sidecar so the metrics CSV
  // itself stays byte-identical across same-seed runs.
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(config_to_json_text(cfg_));
  meta["wall_clock_seconds"] = seconds;
  meta["steps"] = step_;
  std::ofstream side(cfg_.metrics_path + ".meta.json");
  side << meta.dump(2) << "\n";

  return cfg_.metrics_path;
}

policy::Checkpoint Trainer::checkpoint() const {
  policy::Checkpoint ckpt;
  ckpt.params = params_;
  ckpt.adam = adam_;
  ckpt.seed = cfg_.seed;
  ckpt.step = step_;
  return ckpt;
}

double Trainer::evaluate_mean_key_reward(int prompts, int samples_per_prompt,
                                         std::uint64_t eval_seed) {
  const auto& task = engine_->tasks().front();
  const DiffusionSchedule schedule{cfg_.diffusion_steps};
  Rng eval_root(eval_seed);
  double total = 0.0;
  int count = 0;
  for (int p = 0; p < prompts; ++p) {
    Rng prompt_rng = eval_root.split(p);
    const auto inst = task_generate(task, vocab_, prompt_rng);
    Rng gen_rng = prompt_rng.split(1);
    auto group = rollout::sample_group(
        params_, vocab_, inst.x, samples_per_prompt, schedule,
        static_cast<std::size_t>(task.max_response_len), gen_rng,
        cfg_.workers);
    for (const auto& s : group.samples) {
      total += key_reward(task, vocab_, inst, s.y);
      ++count;
    }
  }
  return total / count;
}

}  // namespace maskrl::harness
