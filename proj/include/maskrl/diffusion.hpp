#pragma once

#include "maskrl/rng.hpp"
#include "maskrl/tensor.hpp"
#include "maskrl/vocab.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace maskrl::diffusion {

// Clean sequence plus the step index at which each position was committed.
// unmask_step[i] == 0 means position i was already clean in the initial
// state; otherwise unmask_step[i] = p in {1..T} means it committed during
// the transition ending at schedule step p. This O(L) record is enough to
// recover any intermediate diffusion state (see rollout::reconstruct).
struct Trajectory {
  Sequence y0;
  std::vector<int> unmask_step;
  int total_steps = 0;
};

// Per-position categorical predictor for clean tokens given a noisy state:
// returns an (L x vocab) matrix of probabilities for y0 given (y_t, x).
using PredictFn =
    std::function<Matrix(const Sequence& y_t, const Sequence& x)>;

// Forward masking marginal: each position of y0 independently becomes the
// mask token with probability t.
Sequence forward_mask(const Vocabulary& vocab, const Sequence& y0, double t,
                      Rng& rng);

// One forward draw at t1 plus the deterministic complement: position i is
// masked in the second output iff it is clean in the first. The two masked
// sets partition [0, L).
std::pair<Sequence, Sequence> complementary_pair(const Vocabulary& vocab,
                                                 const Sequence& y0, double t1,
                                                 Rng& rng);

// One reverse transition t -> s (s < t). Clean positions are copied; each
// masked position draws from the mixture (t-s)/t * y0_probs + s/t * mask.
// Drawing the mask token from y0_probs leaves the position masked, which is
// exactly the mixture semantics. y0_probs rows must be normalized to 1e-6
// at every masked position.
Sequence posterior_step(const Vocabulary& vocab, const Sequence& y_t,
                        const Matrix& y0_probs, double t, double s, Rng& rng);

// masked_count / length; the timestep whose expected mask fraction matches
// an observed state. Rejects length 0.
double mask_fraction_to_timestep(std::size_t masked_count, std::size_t length);

// Run the reverse process from init's mask fraction down to t = 0 and
// record when each position committed. The start index is the largest grid
// step whose timestep still covers init's mask fraction, so a fully masked
// init runs all T steps and a clean init runs none. Any position still
// masked after the last step is committed to the argmax of the prediction
// over non-mask tokens, so the output never contains the mask token.
// If history is non-null it receives the state after every executed step.
Trajectory generate(const PredictFn& predict, const Vocabulary& vocab,
                    const Sequence& x, const Sequence& init,
                    const DiffusionSchedule& schedule, Rng& rng,
                    std::vector<Sequence>* history = nullptr);

// Same reverse process but starting at an explicit step index, running
// exactly T - start_step transitions; recorded unmask steps land in
// {start_step+1 .. T}. Tree-search restarts use this so a rewound state
// resumes at its recorded step regardless of its realized mask count.
Trajectory generate_from_step(const PredictFn& predict,
                              const Vocabulary& vocab, const Sequence& x,
                              const Sequence& init,
                              const DiffusionSchedule& schedule,
                              int start_step, Rng& rng,
                              std::vector<Sequence>* history = nullptr);

}  // namespace maskrl::diffusion
