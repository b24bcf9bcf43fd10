#pragma once

#include "maskrl/policy.hpp"
#include "maskrl/rng.hpp"
#include "maskrl/vocab.hpp"

#include <string>
#include <vector>

namespace maskrl::likelihood {

// Sequence log-likelihood estimators for masked-diffusion policies. All of
// them are Monte Carlo forms of
//   log pi(y|x) ~ E_{t, y_t}[ w(t) * sum_{k masked} log pi(y[k] | y_t, x) ]
// and differ in how t and y_t are drawn and in the weight w(t).
enum class Estimator {
  D1Full,      // one sample pinned at t = 1 (fully masked), w = 1
  Mc1Uniform,  // one sample, t ~ U[0,1], w = 1/t
  Mc2Iid,      // two independent Mc1Uniform samples, averaged
  CompW1,      // complementary pair at t1 ~ U[0,1], w = 1, halved sum
  CompWinv     // complementary pair, each sum weighted 1/t_j, halved
};

Estimator estimator_from_string(const std::string& name);
std::string estimator_to_string(Estimator e);

// w(t) for the 1/t-weighted methods, 1 otherwise.
double estimator_weight(Estimator e, double t);

struct LoglikSample {
  double t = 0.0;
  MaskPattern positions;
  double logprob_sum = 0.0;
  double weight = 1.0;
};

struct LoglikResult {
  double value = 0.0;
  std::vector<LoglikSample> samples;
};

// One estimate of log pi(y|x). A draw of exactly t = 0 under a 1/t-weighted
// method is resampled. When grads is non-null the gradient of
// (grad_weight * value) is accumulated.
LoglikResult estimate_loglik(Estimator e, const policy::PolicyParams& params,
                             const Vocabulary& vocab, const Sequence& y,
                             const Sequence& x, Rng& rng,
                             double grad_weight = 0.0,
                             policy::GradientBuffer* grads = nullptr);

// Exact expectation of the estimator: enumerates all 2^L mask patterns and
// integrates over t with 2048-point midpoint quadrature. Only for L <= 8.
double exact_expected(Estimator e, const policy::PolicyParams& params,
                      const Vocabulary& vocab, const Sequence& y,
                      const Sequence& x);

// Negated likelihood estimate under the training estimator; accumulates the
// gradient of the loss itself, ready for a minimizing optimizer.
double sft_loss(const policy::PolicyParams& params, const Vocabulary& vocab,
                const Sequence& y, const Sequence& x, Estimator e, Rng& rng,
                policy::GradientBuffer* grads = nullptr);

}  // namespace maskrl::likelihood
