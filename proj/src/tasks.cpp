#include "maskrl/tasks.hpp"

#include <stdexcept>

namespace maskrl::harness {

TaskDef make_task(const std::string& name) {
  TaskDef t;
  if (name == "modsum") {
    t.kind = TaskKind::ModSum;
    t.name = "modsum";
    t.reward.kind = rewards::KeyRewardKind::Correctness;
    t.mode = GuidedMode::AnswerForcing;
  } else if (name == "interval") {
    t.kind = TaskKind::Interval;
    t.name = "interval";
    t.reward.kind = rewards::KeyRewardKind::Iou;
    t.mode = GuidedMode::TreeSearch;
  } else {
    throw std::invalid_argument("unknown task: " + name);
  }
  return t;
}

TaskInstance task_generate(const TaskDef& task, const Vocabulary& vocab,
                           Rng& rng) {
  TaskInstance inst;
  if (task.kind == TaskKind::ModSum) {
    const int d1 = static_cast<int>(rng.next_below(10));
    const int d2 = static_cast<int>(rng.next_below(10));
    const int d3 = static_cast<int>(rng.next_below(10));
    inst.x = {vocab.digit(d1), vocab.plus_id, vocab.digit(d2), vocab.plus_id,
              vocab.digit(d3)};
    inst.answer = {vocab.digit((d1 + d2 + d3) % 10)};
  } else {
    const int c = static_cast<int>(rng.next_below(16));
    const int w = static_cast<int>(rng.next_below(16 - c));
    inst.x = {vocab.coord(c), vocab.coord(w)};
    inst.interval = {c, c + w};
    inst.answer = {vocab.coord(c), vocab.coord(c + w)};
  }
  return inst;
}

Sequence sft_response(const TaskDef& task, const Vocabulary& vocab,
                      const TaskInstance& inst, Rng& rng) {
  Sequence y;
  y.push_back(vocab.think_open_id);
  if (task.kind == TaskKind::ModSum) {
    for (TokenId tok : inst.x) y.push_back(tok);
  } else {
    // The trace works the endpoint out before the answer restates it.
    y.push_back(vocab.coord(inst.interval.first));
    y.push_back(inst.x[1]);
    y.push_back(vocab.coord(inst.interval.second));
  }
  y.push_back(vocab.think_close_id);

  const std::size_t len = static_cast<std::size_t>(task.max_response_len);
  const std::size_t answer_block = inst.answer.size() + 2;
  if (y.size() + answer_block > len)
    throw std::logic_error("sft_response: demonstration exceeds max length");

  // Filler run before the answer tags. The run spans the whole gap so the
  // tag positions are unambiguous per task; mixed-alignment corpora leave
  // the sampler committing duplicate tags at neighbouring positions.
  (void)rng;
  const std::size_t slack = len - y.size() - answer_block;
  for (std::size_t i = 0; i < slack; ++i) y.push_back(vocab.fim_id);

  y.push_back(vocab.answer_open_id);
  for (TokenId tok : inst.answer) y.push_back(tok);
  y.push_back(vocab.answer_close_id);
  while (y.size() < len) y.push_back(vocab.pad_id);
  return y;
}

double key_reward(const TaskDef& task, const Vocabulary& vocab,
                  const TaskInstance& inst, const Sequence& response) {
  if (task.kind == TaskKind::ModSum)
    return rewards::correctness_reward(vocab, response, inst.answer);
  return rewards::iou_reward(vocab, response, inst.interval);
}

}  // namespace maskrl::harness
