#pragma once

#include "maskrl/config.hpp"
#include "maskrl/engine.hpp"
#include "maskrl/policy.hpp"

#include <fstream>
#include <memory>
#include <optional>
#include <string>

namespace maskrl::harness {

// Training aborted on a non-finite loss or gradient; the offending batch is
// dumped in trajectory JSONL form next to the metrics file.
struct NumericalAbort : std::runtime_error {
  std::string dump_path;
  NumericalAbort(const std::string& what, std::string dump)
      : std::runtime_error(what), dump_path(std::move(dump)) {}
};

struct StepRecord {
  long step = 0;
  BatchResult batch;
  double loss = 0.0;  // negated objective, the quantity being minimized
};

// Deterministic training loop: every stochastic decision of step s derives
// from (seed, s), so a run can be checkpointed and resumed bit-exactly and
// two runs with the same seed produce identical metrics files.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);
  Trainer(const RunConfig& cfg, const policy::Checkpoint& resume);
  ~Trainer();

  // One optimization step (no metrics side effects).
  StepRecord run_step();

  // Full loop: metrics rows, periodic checkpoints, final checkpoint.
  // Returns the metrics path.
  std::string run();

  const policy::PolicyParams& params() const { return params_; }
  const Vocabulary& vocab() const { return vocab_; }
  DataEngine& engine() { return *engine_; }
  long step() const { return step_; }

  policy::Checkpoint checkpoint() const;

  // Unguided evaluation: mean key reward of `samples_per_prompt` free
  // samples over `prompts` fresh instances of the first configured task.
  double evaluate_mean_key_reward(int prompts, int samples_per_prompt,
                                  std::uint64_t eval_seed = 9000);

  static const std::string& metrics_header();

 private:
  void write_metrics_row(const StepRecord& rec, std::ofstream& out) const;
  void dump_abort(const BatchResult& batch) const;

  RunConfig cfg_;
  Vocabulary vocab_;
  policy::PolicyParams params_;
  policy::GradientBuffer grads_;
  policy::AdamState adam_;
  std::unique_ptr<DataEngine> engine_;
  std::unique_ptr<reward_net::RewardClient> client_;
  std::unique_ptr<policy::PolicyParams> kl_ref_;
  long step_ = 0;
};

}  // namespace maskrl::harness
