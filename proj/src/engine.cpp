#include "maskrl/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace maskrl::harness {

namespace {

// Stream tags within one batch draw.
constexpr std::uint64_t kMixTag = 0;
constexpr std::uint64_t kPickTag = 1;
constexpr std::uint64_t kTaskTag = 2;
constexpr std::uint64_t kInstanceTag = 3;
constexpr std::uint64_t kRolloutTag = 4;
constexpr std::uint64_t kKlTag = 5;

}  // namespace

DataEngine::DataEngine(const RunConfig& cfg, const Vocabulary& vocab,
                       Rng corpus_rng)
    : cfg_(cfg), vocab_(vocab) {
  for (const auto& name : cfg.tasks) tasks_.push_back(make_task(name));

  // Offline demonstrations, fixed at construction.
  for (const auto& task : tasks_) {
    for (int i = 0; i < cfg.sft_corpus_size; ++i) {
      Rng item_rng = corpus_rng.split(corpus_.size());
      const auto inst = task_generate(task, vocab_, item_rng);
      OfflinePair pair;
      pair.x = inst.x;
      pair.y = sft_response(task, vocab_, inst, item_rng);
      pair.task = task.name;
      corpus_.push_back(std::move(pair));
    }
  }
}

BatchResult DataEngine::sft_batch(Rng& rng) {
  BatchResult batch;
  batch.task = "sft";
  Rng pick = rng.split(kPickTag);
  for (int i = 0; i < cfg_.group_size; ++i) {
    const auto& pair = corpus_[pick.next_below(corpus_.size())];
    objectives::BatchItem item;
    item.x = pair.x;
    item.y = pair.y;
    item.advantage = 1.0;  // SFT weight
    item.source = objectives::SampleSource::OfflineSft;
    batch.items.push_back(std::move(item));
  }
  batch.adv_mean = 1.0;
  batch.adv_min = 1.0;
  batch.adv_max = 1.0;
  return batch;
}

BatchResult DataEngine::online_batch(const policy::PolicyParams& params,
                                     Rng& rng) {
  const auto& task =
      tasks_[tasks_.size() == 1
                 ? 0
                 : rng.split(kTaskTag).next_below(tasks_.size())];
  Rng inst_rng = rng.split(kInstanceTag);
  const auto inst = task_generate(task, vocab_, inst_rng);

  // A configured reward service scores every online sample; otherwise the
  // built-in rewards run locally. Remote-only tasks cannot run without one.
  rollout::RewardFn key_fn;
  if (client_ != nullptr) {
    key_fn = [this, &task, &inst](const Sequence& response) {
      return client_->evaluate(task.name, inst.x, response);
    };
  } else if (task.reward.kind == rewards::KeyRewardKind::Remote) {
    throw ConfigError("task " + task.name + " requires a reward server");
  } else {
    key_fn = [this, &task, &inst](const Sequence& response) {
      return key_reward(task, vocab_, inst, response);
    };
  }

  BatchResult batch;
  batch.task = task.name;
  Rng roll_rng = rng.split(kRolloutTag);
  const DiffusionSchedule schedule{cfg_.diffusion_steps};
  const auto max_len = static_cast<std::size_t>(task.max_response_len);

  if (task.mode == GuidedMode::AnswerForcing) {
    rollout::ForcingConfig fc;
    fc.tau = cfg_.tau;
    fc.inject_prob = cfg_.inject_prob;
    batch.group =
        rollout::answer_force(params, vocab_, inst.x, inst.answer,
                              cfg_.group_size, schedule, fc, key_fn, max_len,
                              roll_rng, cfg_.workers);
  } else {
    rollout::RestartSchedule rs;
    rs.base_group = cfg_.group_size;
    rs.restart_steps = cfg_.restart_steps.empty()
                           ? std::vector<int>{0}
                           : cfg_.restart_steps;
    auto result = rollout::tree_search(params, vocab_, inst.x, key_fn, rs,
                                       schedule, max_len, roll_rng,
                                       cfg_.workers);
    batch.group = std::move(result.group);
    batch.expansion_max = std::move(result.expansion_max);
  }

  // Auxiliary shaping on top of the key reward; gates above saw key only.
  for (auto& s : batch.group.samples) {
    rewards::RewardParts parts;
    parts.key = s.key_reward;
    parts.format = rewards::format_reward(vocab_, s.y);
    parts.repetition = rewards::repetition_penalty(vocab_, s.y);
    s.reward = rewards::combine(task.reward, parts).combined;
    if (s.source == objectives::SampleSource::AnswerForced)
      batch.forced_count += 1;
  }

  const auto combined = batch.group.rewards();
  const auto grpo = objectives::grpo_advantages(combined);
  auto distill = objectives::bon_weights(combined);
  // A fully tied group has no best sample; distilling the tie-broken
  // argmax would just clone an arbitrary rollout.
  if (*std::max_element(combined.begin(), combined.end()) ==
      *std::min_element(combined.begin(), combined.end()))
    std::fill(distill.begin(), distill.end(), 0.0);
  auto adv = objectives::aggregate(cfg_.gamma, distill, grpo);
  batch.adv_grpo_sum = std::accumulate(grpo.begin(), grpo.end(), 0.0);

  if (cfg_.kl_beta > 0.0 && kl_ref_ != nullptr) {
    Rng kl_rng = rng.split(kKlTag);
    double kl_sum = 0.0;
    for (std::size_t i = 0; i < batch.group.samples.size(); ++i) {
      Rng sample_rng = kl_rng.split(i);
      const auto k = objectives::kl_estimate_detail(
          batch.group.samples[i].y, batch.group.x, params, *kl_ref_, vocab_,
          cfg_.estimator_enum(), sample_rng);
      kl_sum += k.value;
      // Effective advantage of the penalty term -beta * kl under the k3
      // estimator: d(-beta*kl)/d loglik = beta * (ratio - 1).
      adv[i] += cfg_.kl_beta * (k.ratio - 1.0);
    }
    batch.kl_mean = kl_sum / batch.group.samples.size();
  }

  double key_sum = 0.0, comb_sum = 0.0, sampled_sum = 0.0;
  std::size_t sampled_n = 0;
  for (std::size_t i = 0; i < batch.group.samples.size(); ++i) {
    const auto& s = batch.group.samples[i];
    key_sum += s.key_reward;
    comb_sum += s.reward;
    if (s.source != objectives::SampleSource::AnswerForced) {
      sampled_sum += s.key_reward;
      ++sampled_n;
    }
    objectives::BatchItem item;
    item.x = batch.group.x;
    item.y = s.y;
    item.advantage = adv[i];
    item.source = s.source;
    batch.items.push_back(std::move(item));
  }
  const double n = static_cast<double>(batch.group.samples.size());
  batch.mean_key_reward = key_sum / n;
  batch.mean_key_sampled = sampled_n ? sampled_sum / sampled_n : 0.0;
  batch.mean_combined_reward = comb_sum / n;
  batch.adv_mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  batch.adv_min = *std::min_element(adv.begin(), adv.end());
  batch.adv_max = *std::max_element(adv.begin(), adv.end());
  return batch;
}

BatchResult DataEngine::next_batch(const policy::PolicyParams& params,
                                   Rng& rng, bool force_sft) {
  const double mix = rng.split(kMixTag).next_double();
  if (force_sft || mix < cfg_.sft_ratio) return sft_batch(rng);
  return online_batch(params, rng);
}

}  // namespace maskrl::harness
