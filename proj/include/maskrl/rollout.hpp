#pragma once

#include "maskrl/diffusion.hpp"
#include "maskrl/objectives.hpp"
#include "maskrl/policy.hpp"
#include "maskrl/rng.hpp"
#include "maskrl/vocab.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace maskrl::rollout {

using objectives::Group;
using objectives::GroupSample;
using objectives::SampleSource;

// Key reward of a finished response; gating decisions consume this alone,
// never the combined reward.
using RewardFn = std::function<double(const Sequence& response)>;

// Restart step indices s_1..s_k for tree search; s_1 must be 0 and every
// index maps to the timestep 1 - s_i / T.
struct RestartSchedule {
  int base_group = 8;
  std::vector<int> restart_steps = {0};
};

struct ForcingConfig {
  double tau = 0.5;          // gate threshold on the best unforced key reward
  double inject_prob = 0.1;  // injection coin
};

// PredictFn bound to a fixed set of parameters.
diffusion::PredictFn make_predictor(const policy::PolicyParams& params);

// N independent generations from fully masked initial states. Sample i uses
// the stream rng.split(i); with workers > 1 the generations fan out across
// threads and are merged by sample index, so results do not depend on the
// worker count.
Group sample_group(const policy::PolicyParams& params, const Vocabulary& vocab,
                   const Sequence& x, int n,
                   const DiffusionSchedule& schedule, std::size_t max_len,
                   Rng& rng, int workers = 1);

// Generates N + 1 samples in parallel: N from fully masked states and one
// from "M..M <answer> z* </answer>" started at the timestep matching its
// mask fraction. If the best unforced key reward stays below cfg.tau and
// the injection coin comes up, the group becomes {y^2..y^{N+1}} with the
// forced sample last; otherwise {y^1..y^N}. Group size is always N. Every
// sample, including the forced one, carries its key reward.
Group answer_force(const policy::PolicyParams& params, const Vocabulary& vocab,
                   const Sequence& x, const Sequence& z_star, int n,
                   const DiffusionSchedule& schedule, const ForcingConfig& cfg,
                   const RewardFn& reward_fn, std::size_t max_len, Rng& rng,
                   int workers = 1);

// The injection decision in isolation, for exhaustive gate tests.
bool answer_force_gate(double max_unforced_reward, double tau, double coin,
                       double inject_prob);

struct TreeSearchResult {
  Group group;                        // all N*k samples in generation order
  std::vector<double> expansion_max;  // running best key reward per expansion
};

// Expansion 1 samples N runs from fully masked states; after expansion i the
// best sample among all N*i so far (lowest index on ties) is rewound to
// restart step s_{i+1} and seeds all N runs of the next expansion, which
// execute T - s_{i+1} steps. Streams derive from rng.split(expansion)
// .split(sample), so a worker pool cannot change the outcome.
TreeSearchResult tree_search(const policy::PolicyParams& params,
                             const Vocabulary& vocab, const Sequence& x,
                             const RewardFn& reward_fn,
                             const RestartSchedule& restarts,
                             const DiffusionSchedule& schedule,
                             std::size_t max_len, Rng& rng, int workers = 1);

// State at step index s: position i holds y0[i] when unmask_step[i] <= s,
// else the mask token.
Sequence reconstruct(const diffusion::Trajectory& traj,
                     const Vocabulary& vocab, int s);

struct ParsedResponse {
  Sequence think;
  Sequence answer;
  bool well_formed = false;
};

// Extracts the spans inside the think and answer tags. well_formed requires
// exactly one occurrence of each tag, in order, with only pad or filler
// tokens after the answer close tag; malformed responses come back with
// empty spans.
ParsedResponse parse_response(const Vocabulary& vocab, const Sequence& y);

// One JSON object per sample: prompt, y0, unmask steps, rewards, source.
void dump_group_jsonl(std::ostream& out, const Group& group);

}  // namespace maskrl::rollout
