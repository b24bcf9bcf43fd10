#include "maskrl/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace maskrl::diffusion {

namespace {

void check_timestep(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("timestep outside [0,1]");
}

}  // namespace

Sequence forward_mask(const Vocabulary& vocab, const Sequence& y0, double t,
                      Rng& rng) {
  check_timestep(t);
  Sequence y = y0;
  for (auto& tok : y)
    if (rng.next_double() < t) tok = vocab.mask_id;
  return y;
}

std::pair<Sequence, Sequence> complementary_pair(const Vocabulary& vocab,
                                                 const Sequence& y0, double t1,
                                                 Rng& rng) {
  Sequence first = forward_mask(vocab, y0, t1, rng);
  Sequence second = y0;
  for (std::size_t i = 0; i < y0.size(); ++i)
    if (first[i] != vocab.mask_id) second[i] = vocab.mask_id;
  return {std::move(first), std::move(second)};
}

Sequence posterior_step(const Vocabulary& vocab, const Sequence& y_t,
                        const Matrix& y0_probs, double t, double s, Rng& rng) {
  check_timestep(t);
  check_timestep(s);
  if (s >= t) throw std::invalid_argument("posterior_step requires s < t");
  if (y0_probs.rows != y_t.size() || y0_probs.cols != vocab.size())
    throw std::invalid_argument("posterior_step: y0_probs shape mismatch");

  const double commit_p = (t - s) / t;
  Sequence out = y_t;
  for (std::size_t i = 0; i < y_t.size(); ++i) {
    if (y_t[i] != vocab.mask_id) continue;
    const double* row = y0_probs.row(i);
    double sum = 0.0;
    for (std::size_t v = 0; v < y0_probs.cols; ++v) sum += row[v];
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("posterior_step: unnormalized y0_probs");
    if (rng.next_double() < commit_p) {
      const TokenId tok =
          static_cast<TokenId>(rng.categorical(row, y0_probs.cols));
      // A draw of the mask token keeps the position masked; this folds the
      // predictor's mask mass into the stay probability, matching the
      // mixture (t-s)/t * y0_probs + s/t * mask exactly.
      if (tok != vocab.mask_id) out[i] = tok;
    }
  }
  return out;
}

double mask_fraction_to_timestep(std::size_t masked_count,
                                 std::size_t length) {
  if (length == 0)
    throw std::invalid_argument("mask_fraction_to_timestep: empty sequence");
  if (masked_count > length)
    throw std::invalid_argument("masked_count exceeds length");
  return static_cast<double>(masked_count) / static_cast<double>(length);
}

Trajectory generate(const PredictFn& predict, const Vocabulary& vocab,
                    const Sequence& x, const Sequence& init,
                    const DiffusionSchedule& schedule, Rng& rng,
                    std::vector<Sequence>* history) {
  std::size_t masked = 0;
  for (auto tok : init) masked += tok == vocab.mask_id ? 1 : 0;
  const double t_init = mask_fraction_to_timestep(masked, init.size());

  // Largest step index whose timestep is >= the observed mask fraction.
  const int T = schedule.steps;
  int start = static_cast<int>(std::floor((1.0 - t_init) * T + 1e-9));
  start = std::clamp(start, 0, T);
  return generate_from_step(predict, vocab, x, init, schedule, start, rng,
                            history);
}

Trajectory generate_from_step(const PredictFn& predict,
                              const Vocabulary& vocab, const Sequence& x,
                              const Sequence& init,
                              const DiffusionSchedule& schedule,
                              int start, Rng& rng,
                              std::vector<Sequence>* history) {
  const int T = schedule.steps;
  const std::size_t L = init.size();
  if (start < 0 || start > T)
    throw std::invalid_argument("generate_from_step: start outside [0, T]");

  Trajectory traj;
  traj.y0 = init;
  traj.unmask_step.assign(L, 0);
  traj.total_steps = T;

  Sequence state = init;
  for (int step = start; step < T; ++step) {
    const double t = schedule.t_of(step);
    const double s = schedule.t_of(step + 1);
    const Matrix probs = predict(state, x);
    Sequence next;
    if (s > 0.0) {
      next = posterior_step(vocab, state, probs, t, s, rng);
    } else {
      // Final transition: commit probability is 1, so every remaining
      // masked position resolves here. A draw that lands on the mask token
      // falls back to the non-mask argmax so no mask can leak through.
      next = state;
      for (std::size_t i = 0; i < L; ++i) {
        if (state[i] != vocab.mask_id) continue;
        const double* row = probs.row(i);
        TokenId best = 0;
        double best_p = -1.0;
        for (std::size_t v = 0; v < probs.cols; ++v) {
          if (static_cast<TokenId>(v) == vocab.mask_id) continue;
          if (row[v] > best_p) {
            best_p = row[v];
            best = static_cast<TokenId>(v);
          }
        }
        const TokenId drawn =
            static_cast<TokenId>(rng.categorical(row, probs.cols));
        next[i] = drawn == vocab.mask_id ? best : drawn;
      }
    }
    for (std::size_t i = 0; i < L; ++i)
      if (state[i] == vocab.mask_id && next[i] != vocab.mask_id)
        traj.unmask_step[i] = step + 1;
    state = std::move(next);
    if (history) history->push_back(state);
  }

  traj.y0 = state;
  return traj;
}

}  // namespace maskrl::diffusion
