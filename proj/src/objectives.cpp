#include "maskrl/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace maskrl::objectives {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kDegenerateStd = 1e-12;

}  // namespace

const char* source_to_string(SampleSource s) {
  switch (s) {
    case SampleSource::Sampled: return "sampled";
    case SampleSource::AnswerForced: return "answer_forced";
    case SampleSource::OfflineSft: return "offline_sft";
  }
  return "unknown";
}

std::vector<double> Group::rewards() const {
  std::vector<double> r;
  r.reserve(samples.size());
  for (const auto& s : samples) r.push_back(s.reward);
  return r;
}

std::vector<double> Group::key_rewards() const {
  std::vector<double> r;
  r.reserve(samples.size());
  for (const auto& s : samples) r.push_back(s.key_reward);
  return r;
}

AdvantageVector grpo_advantages(const std::vector<double>& rewards) {
  const std::size_t n = rewards.size();
  if (n == 0) throw std::invalid_argument("grpo_advantages: empty group");
  const double mean =
      std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double std_dev = std::sqrt(var / n);  // population std
  AdvantageVector a(n, 0.0);
  if (std_dev < kDegenerateStd) return a;  // vanishing training signal
  for (std::size_t i = 0; i < n; ++i) a[i] = (rewards[i] - mean) / std_dev;
  return a;
}

AdvantageVector bon_weights(const std::vector<double>& rewards) {
  if (rewards.empty()) throw std::invalid_argument("bon_weights: empty group");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rewards.size(); ++i)
    if (rewards[i] > rewards[best]) best = i;
  AdvantageVector a(rewards.size(), 0.0);
  a[best] = 1.0;
  return a;
}

AdvantageVector aggregate(double gamma, const AdvantageVector& distill,
                          const AdvantageVector& grpo) {
  if (distill.size() != grpo.size())
    throw std::invalid_argument("aggregate: length mismatch");
  AdvantageVector out(distill.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = gamma * distill[i] + (1.0 - gamma) * grpo[i];
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> pair_by_reward(
    const std::vector<double>& rewards) {
  std::vector<std::size_t> order(rewards.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return rewards[a] > rewards[b];
                   });
  if (order.size() % 2 == 1) order.erase(order.begin() + order.size() / 2);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < order.size() / 2; ++i)
    pairs.emplace_back(order[i], order[order.size() - 1 - i]);
  return pairs;
}

namespace {

// Paired likelihood estimate: both policies see identical mask draws.
double paired_loglik(const policy::PolicyParams& p, const Vocabulary& vocab,
                     const Sequence& y, const Sequence& x,
                     likelihood::Estimator est, const Rng& stream) {
  Rng copy = stream;
  return likelihood::estimate_loglik(est, p, vocab, y, x, copy).value;
}

AdvantageVector preference_weights(
    const Group& group, const policy::PolicyParams& theta,
    const policy::PolicyParams* ref, double dpo_beta, double label_smooth,
    const Vocabulary& vocab, likelihood::Estimator est, Rng& rng) {
  if (ref == nullptr)
    throw std::invalid_argument("dpo weights require a reference policy");
  if (!(label_smooth >= 0.0 && label_smooth < 0.5))
    throw std::invalid_argument("label_smooth outside [0, 0.5)");

  AdvantageVector out(group.samples.size(), 0.0);
  for (const auto& [wi, li] : pair_by_reward(group.rewards())) {
    const Rng sw = rng.split(wi), sl = rng.split(li);
    const auto& yw = group.samples[wi].y;
    const auto& yl = group.samples[li].y;
    const double dw = paired_loglik(theta, vocab, yw, group.x, est, sw) -
                      paired_loglik(theta, vocab, yl, group.x, est, sl);
    const double dr = paired_loglik(*ref, vocab, yw, group.x, est, sw) -
                      paired_loglik(*ref, vocab, yl, group.x, est, sl);
    const double z = dpo_beta * (dw - dr);
    const double magnitude =
        dpo_beta * ((1.0 - label_smooth) * sigmoid(-z) -
                    label_smooth * sigmoid(z));
    out[wi] = magnitude;
    out[li] = -magnitude;
  }
  return out;
}

}  // namespace

AdvantageVector dpo_weights(const Group& group,
                            const policy::PolicyParams& theta,
                            const policy::PolicyParams* ref, double dpo_beta,
                            const Vocabulary& vocab,
                            likelihood::Estimator est, Rng& rng) {
  return preference_weights(group, theta, ref, dpo_beta, 0.0, vocab, est,
                            rng);
}

AdvantageVector dpo_smooth_weights(const Group& group,
                                   const policy::PolicyParams& theta,
                                   const policy::PolicyParams* ref,
                                   double dpo_beta, double label_smooth,
                                   const Vocabulary& vocab,
                                   likelihood::Estimator est, Rng& rng) {
  return preference_weights(group, theta, ref, dpo_beta, label_smooth, vocab,
                            est, rng);
}

AdvantageVector slic_weights(const Group& group,
                             const policy::PolicyParams& theta,
                             double slic_margin, const Vocabulary& vocab,
                             likelihood::Estimator est, Rng& rng) {
  AdvantageVector out(group.samples.size(), 0.0);
  for (const auto& [wi, li] : pair_by_reward(group.rewards())) {
    const double lw = paired_loglik(theta, vocab, group.samples[wi].y,
                                    group.x, est, rng.split(wi));
    const double ll = paired_loglik(theta, vocab, group.samples[li].y,
                                    group.x, est, rng.split(li));
    if (slic_margin - lw + ll > 0.0) {
      out[wi] = 1.0;
      out[li] = -1.0;
    }
  }
  return out;
}

double unified_loss(const std::vector<BatchItem>& batch,
                    const policy::PolicyParams& params,
                    const Vocabulary& vocab, likelihood::Estimator est,
                    Rng& rng, policy::GradientBuffer* grads,
                    bool length_normalize) {
  if (batch.empty()) throw std::invalid_argument("unified_loss: empty batch");
  const double n = static_cast<double>(batch.size());
  double j = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& item = batch[i];
    if (item.advantage == 0.0) continue;
    const double norm =
        length_normalize ? n * static_cast<double>(item.y.size()) : n;
    Rng stream = rng.split(i);
    const auto res = likelihood::estimate_loglik(
        est, params, vocab, item.y, item.x, stream,
        grads != nullptr ? -item.advantage / norm : 0.0, grads);
    j += item.advantage * res.value / norm;
  }
  if (!std::isfinite(j))
    throw std::runtime_error("unified_loss: non-finite estimate");
  return j;
}

double grpo_clipped_surrogate(const Group& group,
                              const policy::PolicyParams& theta,
                              const policy::PolicyParams& pi_old,
                              double clip_eps,
                              const AdvantageVector& advantages,
                              const Vocabulary& vocab,
                              likelihood::Estimator est, Rng& rng,
                              policy::GradientBuffer* grads) {
  if (advantages.size() != group.samples.size())
    throw std::invalid_argument("grpo_clipped_surrogate: size mismatch");
  const double n = static_cast<double>(group.samples.size());
  double j = 0.0;
  for (std::size_t i = 0; i < group.samples.size(); ++i) {
    const Rng stream = rng.split(i);
    const auto& y = group.samples[i].y;
    const double lt = paired_loglik(theta, vocab, y, group.x, est, stream);
    const double lo = paired_loglik(pi_old, vocab, y, group.x, est, stream);
    const double rho = std::exp(lt - lo);
    const double clipped =
        std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
    const double a = advantages[i];
    const double v1 = rho * a;
    const double v2 = clipped * a;
    j += std::min(v1, v2) / n;

    // d min(v1, v2) / d loglik_theta: rho*a through the unclipped branch,
    // likewise inside the clip band, zero when the clamp is active.
    double coef = 0.0;
    if (v1 <= v2) {
      coef = rho * a;
    } else if (rho > 1.0 - clip_eps && rho < 1.0 + clip_eps) {
      coef = rho * a;
    }
    if (grads != nullptr && coef != 0.0) {
      Rng replay = stream;
      likelihood::estimate_loglik(est, theta, vocab, y, group.x, replay,
                                  -coef / n, grads);
    }
  }
  return j;
}

KlEstimate kl_estimate_detail(const Sequence& y, const Sequence& x,
                              const policy::PolicyParams& theta,
                              const policy::PolicyParams& ref,
                              const Vocabulary& vocab,
                              likelihood::Estimator est, Rng& rng) {
  const Rng stream = rng.split(0);
  const double lt = paired_loglik(theta, vocab, y, x, est, stream);
  const double lr = paired_loglik(ref, vocab, y, x, est, stream);
  KlEstimate k;
  k.ratio = std::exp(lr - lt);
  k.value = k.ratio - 1.0 - (lr - lt);
  return k;
}

double kl_estimate(const Sequence& y, const Sequence& x,
                   const policy::PolicyParams& theta,
                   const policy::PolicyParams& ref, const Vocabulary& vocab,
                   likelihood::Estimator est, Rng& rng) {
  return kl_estimate_detail(y, x, theta, ref, vocab, est, rng).value;
}

}  // namespace maskrl::objectives
