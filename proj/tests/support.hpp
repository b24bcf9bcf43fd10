#pragma once

#include "maskrl/likelihood.hpp"
#include "maskrl/policy.hpp"
#include "maskrl/rng.hpp"
#include "maskrl/vocab.hpp"

#include <cmath>
#include <cstdint>

namespace maskrl::test {

// Small random policy over the 8-token generic vocabulary, plus a random
// clean sequence / noisy state / prompt. The workhorse fixture for the
// gradient and estimator suites.
struct SmallCase {
  Vocabulary vocab;
  policy::PolicyParams params;
  Sequence y, y_t, x;
  MaskPattern positions;
};

inline SmallCase small_case(std::uint64_t seed, std::size_t vocab_size = 8,
                            std::size_t dim = 8, std::size_t len = 5,
                            std::size_t xlen = 2, double init_scale = 0.05) {
  SmallCase c;
  c.vocab = Vocabulary::generic(vocab_size);
  policy::PolicyConfig pc;
  pc.vocab_size = c.vocab.size();
  pc.dim = dim;
  pc.max_ctx = 16;
  pc.init_scale = init_scale;
  Rng rng(seed);
  Rng init = rng.split(0);
  c.params = policy::PolicyParams::init(pc, init);

  Rng data = rng.split(1);
  auto content = [&](Rng& r) {
    return static_cast<TokenId>(1 + r.next_below(vocab_size - 1));
  };
  for (std::size_t i = 0; i < len; ++i) c.y.push_back(content(data));
  for (std::size_t i = 0; i < xlen; ++i) c.x.push_back(content(data));
  c.y_t = c.y;
  for (std::size_t i = 0; i < len; ++i) {
    if (data.next_double() < 0.6) {
      c.y_t[i] = c.vocab.mask_id;
      c.positions.push_back(i);
    }
  }
  if (c.positions.empty()) {
    c.y_t[0] = c.vocab.mask_id;
    c.positions.push_back(0);
  }
  return c;
}

// Policy with all-zero parameters: exactly uniform predictions 1/|V|.
inline policy::PolicyParams uniform_policy(std::size_t vocab_size,
                                           std::size_t dim = 8) {
  policy::PolicyConfig pc;
  pc.vocab_size = vocab_size;
  pc.dim = dim;
  pc.max_ctx = 16;
  policy::PolicyParams p;
  p.cfg = pc;
  p.w = policy::ParamTensors::zeros(pc);
  return p;
}

inline double max_rel_grad_diff(const policy::GradientBuffer& a,
                                const policy::GradientBuffer& b,
                                double abs_floor = 1e-9) {
  auto ta = a.g.all();
  auto tb = b.g.all();
  double worst = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    for (std::size_t j = 0; j < ta[i]->size(); ++j) {
      const double x = ta[i]->data[j], y = tb[i]->data[j];
      const double denom = std::max(std::abs(x), std::abs(y));
      if (denom < abs_floor) continue;
      worst = std::max(worst, std::abs(x - y) / denom);
    }
  }
  return worst;
}

}  // namespace maskrl::test
