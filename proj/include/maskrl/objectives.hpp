#pragma once

#include "maskrl/diffusion.hpp"
#include "maskrl/likelihood.hpp"
#include "maskrl/policy.hpp"
#include "maskrl/rng.hpp"
#include "maskrl/vocab.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace maskrl::objectives {

enum class SampleSource { Sampled, AnswerForced, OfflineSft };

const char* source_to_string(SampleSource s);

struct GroupSample {
  Sequence y;
  double key_reward = 0.0;
  double reward = 0.0;  // combined reward used for advantages
  SampleSource source = SampleSource::Sampled;
  diffusion::Trajectory trajectory;
};

// One prompt with its N responses and rewards; the unit every advantage
// provider operates on.
struct Group {
  Sequence x;
  std::vector<GroupSample> samples;

  std::vector<double> rewards() const;
  std::vector<double> key_rewards() const;
};

using AdvantageVector = std::vector<double>;

// (r_i - mean) / population std. Degenerate groups (std < 1e-12) get all
// zeros rather than a blow-up; they carry no ranking information.
AdvantageVector grpo_advantages(const std::vector<double>& rewards);

// 1 at the highest reward (lowest index on ties), 0 elsewhere.
AdvantageVector bon_weights(const std::vector<double>& rewards);

// gamma * distill + (1 - gamma) * grpo, elementwise.
AdvantageVector aggregate(double gamma, const AdvantageVector& distill,
                          const AdvantageVector& grpo);

// Preference pairs (winner, loser) built by sorting rewards descending and
// matching best-with-worst inward; odd groups drop the median.
std::vector<std::pair<std::size_t, std::size_t>> pair_by_reward(
    const std::vector<double>& rewards);

struct LossSpec {
  double gamma = 0.5;          // distill mixing weight
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  double dpo_beta = 0.1;
  double label_smooth = 0.0;   // DPO-smooth epsilon
  double slic_margin = 1.0;
  likelihood::Estimator estimator = likelihood::Estimator::CompW1;
  double sft_ratio = 0.3;
  bool length_normalize = false;
};

// Per-sample weights realizing the online-DPO gradient: +beta*sigmoid(-z)
// on the winner and the negation on the loser, z treated as a constant.
// Likelihood draws are paired between theta and ref. Entries not in any
// pair (the dropped median) are zero.
AdvantageVector dpo_weights(const Group& group,
                            const policy::PolicyParams& theta,
                            const policy::PolicyParams* ref, double dpo_beta,
                            const Vocabulary& vocab,
                            likelihood::Estimator est, Rng& rng);

// Label-smoothed variant: magnitude beta*((1-eps)*sigmoid(-z) -
// eps*sigmoid(z)). eps must lie in [0, 0.5).
AdvantageVector dpo_smooth_weights(const Group& group,
                                   const policy::PolicyParams& theta,
                                   const policy::PolicyParams* ref,
                                   double dpo_beta, double label_smooth,
                                   const Vocabulary& vocab,
                                   likelihood::Estimator est, Rng& rng);

// +-1 on pairs whose margin tau is violated, 0 otherwise; the indicator
// carries no gradient.
AdvantageVector slic_weights(const Group& group,
                             const policy::PolicyParams& theta,
                             double slic_margin, const Vocabulary& vocab,
                             likelihood::Estimator est, Rng& rng);

struct BatchItem {
  Sequence y;
  Sequence x;
  double advantage = 0.0;
  SampleSource source = SampleSource::Sampled;
};

// J = (1/N) sum_i A_i * loglik_hat(y_i | x_i). Returns J; when grads is
// non-null it accumulates the gradient of -J so the buffer feeds the
// minimizing optimizer directly. Item i always derives its estimator
// stream as rng.split(i), which is what makes paired evaluations across
// objectives line up. Throws on a non-finite estimate.
double unified_loss(const std::vector<BatchItem>& batch,
                    const policy::PolicyParams& params,
                    const Vocabulary& vocab, likelihood::Estimator est,
                    Rng& rng, policy::GradientBuffer* grads = nullptr,
                    bool length_normalize = false);

// Clipped ratio surrogate (1/N) sum min(rho_i A_i, clip(rho_i) A_i) with
// rho_i = exp(loglik_theta - loglik_old) under masks paired between the two
// policies (same rng.split(i) streams as unified_loss). Kept for the
// gradient-equivalence checks; training always goes through unified_loss.
double grpo_clipped_surrogate(const Group& group,
                              const policy::PolicyParams& theta,
                              const policy::PolicyParams& pi_old,
                              double clip_eps,
                              const AdvantageVector& advantages,
                              const Vocabulary& vocab,
                              likelihood::Estimator est, Rng& rng,
                              policy::GradientBuffer* grads = nullptr);

struct KlEstimate {
  double value = 0.0;  // k3 estimate: ratio - 1 - log(ratio)
  double ratio = 0.0;  // exp(loglik_ref - loglik_theta), paired masks
};

KlEstimate kl_estimate_detail(const Sequence& y, const Sequence& x,
                              const policy::PolicyParams& theta,
                              const policy::PolicyParams& ref,
                              const Vocabulary& vocab,
                              likelihood::Estimator est, Rng& rng);

double kl_estimate(const Sequence& y, const Sequence& x,
                   const policy::PolicyParams& theta,
                   const policy::PolicyParams& ref, const Vocabulary& vocab,
                   likelihood::Estimator est, Rng& rng);

}  // namespace maskrl::objectives
