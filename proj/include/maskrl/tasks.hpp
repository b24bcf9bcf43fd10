#pragma once

#include "maskrl/rewards.hpp"
#include "maskrl/rng.hpp"
#include "maskrl/vocab.hpp"

#include <string>
#include <utility>

namespace maskrl::harness {

enum class TaskKind { ModSum, Interval };
enum class GuidedMode { AnswerForcing, TreeSearch };

// Synthetic verifiable tasks. modsum: prompt "d1 + d2 + d3", answer is the
// digit (d1+d2+d3) mod 10, guided by answer forcing under the correctness
// reward. interval: prompt (c, w), answer is the interval [c, c+w] as two
// coordinate tokens, guided by tree search under the IoU reward.
struct TaskDef {
  TaskKind kind = TaskKind::ModSum;
  std::string name = "modsum";
  rewards::RewardSpec reward;
  GuidedMode mode = GuidedMode::AnswerForcing;
  int max_response_len = 12;
};

TaskDef make_task(const std::string& name);

struct TaskInstance {
  Sequence x;
  Sequence answer;                  // modsum target digit
  std::pair<int, int> interval{0, 0};  // interval ground truth [c, d]
};

TaskInstance task_generate(const TaskDef& task, const Vocabulary& vocab,
                           Rng& rng);

// A well-formed demonstration for the offline corpus: the reasoning span
// restates the prompt, a random-length filler run pads the gap before the
// answer tags, pads close out the sequence.
Sequence sft_response(const TaskDef& task, const Vocabulary& vocab,
                      const TaskInstance& inst, Rng& rng);

// Local key reward for an instance (correctness or IoU by task kind).
double key_reward(const TaskDef& task, const Vocabulary& vocab,
                  const TaskInstance& inst, const Sequence& response);

}  // namespace maskrl::harness
