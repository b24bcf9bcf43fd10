#include "maskrl/likelihood.hpp"

#include "maskrl/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace maskrl::likelihood {

Estimator estimator_from_string(const std::string& name) {
  if (name == "d1_full") return Estimator::D1Full;
  if (name == "mc1_uniform") return Estimator::Mc1Uniform;
  if (name == "mc2_iid") return Estimator::Mc2Iid;
  if (name == "comp_w1") return Estimator::CompW1;
  if (name == "comp_winv") return Estimator::CompWinv;
  throw std::invalid_argument("unknown estimator: " + name);
}

std::string estimator_to_string(Estimator e) {
  switch (e) {
    case Estimator::D1Full: return "d1_full";
    case Estimator::Mc1Uniform: return "mc1_uniform";
    case Estimator::Mc2Iid: return "mc2_iid";
    case Estimator::CompW1: return "comp_w1";
    case Estimator::CompWinv: return "comp_winv";
  }
  throw std::logic_error("unreachable");
}

double estimator_weight(Estimator e, double t) {
  switch (e) {
    case Estimator::D1Full:
    case Estimator::CompW1: return 1.0;
    case Estimator::Mc1Uniform:
    case Estimator::Mc2Iid:
    case Estimator::CompWinv:
      if (t <= 0.0) throw std::invalid_argument("1/t weight at t = 0");
      return 1.0 / t;
  }
  throw std::logic_error("unreachable");
}

namespace {

MaskPattern all_positions(std::size_t n) {
  MaskPattern p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  return p;
}

double draw_t_nonzero(Rng& rng) {
  double t = rng.next_double();
  while (t == 0.0) t = rng.next_double();
  return t;
}

LoglikSample eval_sample(const policy::PolicyParams& params,
                         const Vocabulary& vocab, const Sequence& y,
                         const Sequence& x, const Sequence& y_t, double t,
                         double weight, double grad_weight,
                         policy::GradientBuffer* grads) {
  LoglikSample s;
  s.t = t;
  s.weight = weight;
  s.positions = masked_positions(vocab, y_t);
  s.logprob_sum = policy::token_logprob_sum(
      params, vocab, y, y_t, x, s.positions, grad_weight * weight, grads);
  return s;
}

}  // namespace

LoglikResult estimate_loglik(Estimator e, const policy::PolicyParams& params,
                             const Vocabulary& vocab, const Sequence& y,
                             const Sequence& x, Rng& rng, double grad_weight,
                             policy::GradientBuffer* grads) {
  for (TokenId tok : y)
    if (tok == vocab.mask_id)
      throw std::invalid_argument("estimate_loglik: y must be clean");

  LoglikResult result;
  switch (e) {
    case Estimator::D1Full: {
      Sequence y_t(y.size(), vocab.mask_id);
      auto s = eval_sample(params, vocab, y, x, y_t, 1.0, 1.0, grad_weight,
                           grads);
      result.value = s.logprob_sum;
      result.samples.push_back(std::move(s));
      break;
    }
    case Estimator::Mc1Uniform: {
      const double t = draw_t_nonzero(rng);
      Sequence y_t = diffusion::forward_mask(vocab, y, t, rng);
      auto s = eval_sample(params, vocab, y, x, y_t, t, 1.0 / t, grad_weight,
                           grads);
      result.value = s.weight * s.logprob_sum;
      result.samples.push_back(std::move(s));
      break;
    }
    case Estimator::Mc2Iid: {
      double value = 0.0;
      for (int k = 0; k < 2; ++k) {
        const double t = draw_t_nonzero(rng);
        Sequence y_t = diffusion::forward_mask(vocab, y, t, rng);
        auto s = eval_sample(params, vocab, y, x, y_t, t, 0.5 / t,
                             grad_weight, grads);
        value += s.weight * s.logprob_sum;
        result.samples.push_back(std::move(s));
      }
      result.value = value;
      break;
    }
    case Estimator::CompW1:
    case Estimator::CompWinv: {
      double t1 = rng.next_double();
      if (e == Estimator::CompWinv)
        while (t1 == 0.0) t1 = rng.next_double();
      const double t2 = 1.0 - t1;
      auto [y_t1, y_t2] = diffusion::complementary_pair(vocab, y, t1, rng);
      const double w1 = e == Estimator::CompW1 ? 0.5 : 0.5 / t1;
      const double w2 = e == Estimator::CompW1 ? 0.5 : 0.5 / t2;
      auto s1 =
          eval_sample(params, vocab, y, x, y_t1, t1, w1, grad_weight, grads);
      auto s2 =
          eval_sample(params, vocab, y, x, y_t2, t2, w2, grad_weight, grads);
      result.value = s1.weight * s1.logprob_sum + s2.weight * s2.logprob_sum;
      result.samples.push_back(std::move(s1));
      result.samples.push_back(std::move(s2));
      break;
    }
  }
  return result;
}

double exact_expected(Estimator e, const policy::PolicyParams& params,
                      const Vocabulary& vocab, const Sequence& y,
                      const Sequence& x) {
  const std::size_t L = y.size();
  if (L > 8) throw std::invalid_argument("exact_expected: L > 8");
  for (TokenId tok : y)
    if (tok == vocab.mask_id)
      throw std::invalid_argument("exact_expected: y must be clean");

  // Per mask-pattern sums, indexed by bitmask.
  const std::size_t npat = std::size_t{1} << L;
  std::vector<double> pattern_sum(npat, 0.0);
  for (std::size_t m = 1; m < npat; ++m) {
    Sequence y_t = y;
    MaskPattern positions;
    for (std::size_t i = 0; i < L; ++i) {
      if (m & (std::size_t{1} << i)) {
        y_t[i] = vocab.mask_id;
        positions.push_back(i);
      }
    }
    pattern_sum[m] =
        policy::token_logprob_sum(params, vocab, y, y_t, x, positions);
  }

  if (e == Estimator::D1Full) return pattern_sum[npat - 1];

  std::vector<int> bits(npat, 0);
  for (std::size_t m = 1; m < npat; ++m)
    bits[m] = bits[m >> 1] + static_cast<int>(m & 1);

  constexpr int kQuad = 2048;
  double total = 0.0;
  for (int q = 0; q < kQuad; ++q) {
    const double t = (q + 0.5) / kQuad;
    double tp[9], sp[9];
    tp[0] = sp[0] = 1.0;
    for (std::size_t i = 1; i <= L; ++i) {
      tp[i] = tp[i - 1] * t;
      sp[i] = sp[i - 1] * (1.0 - t);
    }
    double acc = 0.0;
    for (std::size_t m = 0; m < npat; ++m) {
      const double pm = tp[bits[m]] * sp[L - bits[m]];
      switch (e) {
        case Estimator::Mc1Uniform:
        case Estimator::Mc2Iid:
          acc += pm * pattern_sum[m] / t;
          break;
        case Estimator::CompW1:
          acc += pm * 0.5 * (pattern_sum[m] + pattern_sum[npat - 1 - m]);
          break;
        case Estimator::CompWinv:
          acc += pm * 0.5 *
                 (pattern_sum[m] / t + pattern_sum[npat - 1 - m] / (1.0 - t));
          break;
        case Estimator::D1Full: break;  // handled above
      }
    }
    total += acc / kQuad;
  }
  return total;
}

double sft_loss(const policy::PolicyParams& params, const Vocabulary& vocab,
                const Sequence& y, const Sequence& x, Estimator e, Rng& rng,
                policy::GradientBuffer* grads) {
  const auto res = estimate_loglik(e, params, vocab, y, x, rng,
                                   grads != nullptr ? -1.0 : 0.0, grads);
  return -res.value;
}

}  // namespace maskrl::likelihood
