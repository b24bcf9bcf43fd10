#pragma once

#include "maskrl/config.hpp"
#include "maskrl/objectives.hpp"
#include "maskrl/policy.hpp"
#include "maskrl/reward_net.hpp"
#include "maskrl/rollout.hpp"
#include "maskrl/tasks.hpp"
#include "maskrl/vocab.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace maskrl::harness {

// Per-step training batch with the quantities the metrics stream records.
struct BatchResult {
  std::vector<objectives::BatchItem> items;
  std::string task;  // task name or "sft"
  double mean_key_reward = 0.0;
  double mean_key_sampled = 0.0;  // non-forced samples only
  double mean_combined_reward = 0.0;
  double adv_mean = 0.0;
  double adv_min = 0.0;
  double adv_max = 0.0;
  double adv_grpo_sum = 0.0;  // sum of the GRPO component over the group
  int forced_count = 0;
  std::vector<double> expansion_max;
  double kl_mean = 0.0;
  rollout::Group group;  // populated for online batches (abort dumps)
};

// The data engine behind Fig-2-style unified training: with probability
// sft_ratio a batch of offline demonstrations with weight 1, otherwise a
// guided online group with aggregated distill/GRPO advantages.
class DataEngine {
 public:
  DataEngine(const RunConfig& cfg, const Vocabulary& vocab, Rng corpus_rng);

  // Remote key rewards; engine keeps the pointer, caller owns the client.
  void set_reward_client(reward_net::RewardClient* client) {
    client_ = client;
  }

  // Reference policy for the optional GRPO+KL configuration.
  void set_kl_reference(const policy::PolicyParams* ref) { kl_ref_ = ref; }

  // force_sft overrides the mixing draw (stage-1 pure SFT).
  BatchResult next_batch(const policy::PolicyParams& params, Rng& rng,
                         bool force_sft = false);

  const std::vector<TaskDef>& tasks() const { return tasks_; }

  struct OfflinePair {
    Sequence x;
    Sequence y;
    std::string task;
  };
  const std::vector<OfflinePair>& corpus() const { return corpus_; }

 private:
  BatchResult sft_batch(Rng& rng);
  BatchResult online_batch(const policy::PolicyParams& params, Rng& rng);

  RunConfig cfg_;
  const Vocabulary& vocab_;
  std::vector<TaskDef> tasks_;
  std::vector<OfflinePair> corpus_;
  reward_net::RewardClient* client_ = nullptr;
  const policy::PolicyParams* kl_ref_ = nullptr;
};

}  // namespace maskrl::harness
