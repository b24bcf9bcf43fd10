#pragma once

#include "maskrl/rng.hpp"
#include "maskrl/tensor.hpp"
#include "maskrl/vocab.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace maskrl::policy {

struct PolicyConfig {
  std::size_t vocab_size = 0;
  std::size_t dim = 32;
  std::size_t layers = 2;
  std::size_t max_ctx = 32;
  double init_scale = 0.02;

  // Width of each block's hidden layer.
  std::size_t hidden() const { return 4 * dim; }

  std::uint64_t hash() const;
  bool operator==(const PolicyConfig&) const = default;
};

// One bidirectional mixing block: pre-norm single-head self-attention
// followed by a pre-norm per-position tanh expansion, both residual.
struct BlockTensors {
  Matrix ln1_g, ln1_b;  // 1 x d attention norm
  Matrix wq, wk, wv;    // d x d attention projections
  Matrix ln2_g, ln2_b;  // 1 x d hidden-layer norm
  Matrix w1;            // 4d x d hidden layer
  Matrix b1;            // 1 x 4d hidden bias
  Matrix w2;            // d x 4d contraction
};

// All parameters of the predictor in a fixed order so gradient buffers and
// optimizer moments stay shape-aligned with the parameters.
struct ParamTensors {
  Matrix embed;  // vocab x d token embeddings
  Matrix pos;    // max_ctx x d learned position features
  std::vector<BlockTensors> blocks;
  Matrix lnf_g, lnf_b;  // 1 x d final norm
  Matrix wout;   // d x vocab output projection

  static ParamTensors zeros(const PolicyConfig& cfg);
  std::vector<Matrix*> all();
  std::vector<const Matrix*> all() const;
  std::vector<std::string> names() const;
  void zero();
  void add_scaled(const ParamTensors& other, double scale);
  bool all_finite() const;
};

// The predictor pi(y0[i] | y_t, x): embeddings plus position features feed
// a short stack of bidirectional attention blocks over the concatenation
// [x ; y_t]; the output projection produces a normalized distribution over
// the vocabulary at every response position.
struct PolicyParams {
  PolicyConfig cfg;
  ParamTensors w;

  static PolicyParams init(const PolicyConfig& cfg, Rng& rng);
};

struct GradientBuffer {
  ParamTensors g;
  std::size_t samples = 0;

  static GradientBuffer zeros(const PolicyConfig& cfg);
  void zero();
  void add(const GradientBuffer& other);
  bool all_finite() const { return g.all_finite(); }
};

// AdamW with decoupled weight decay.
struct AdamState {
  double learning_rate = 0.02;
  double beta1 = 0.99;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  long step = 0;
  ParamTensors m, v;

  static AdamState init(const PolicyConfig& cfg, double lr,
                        double weight_decay);
};

// L x vocab matrix of probabilities for the clean token at every response
// position, rows normalized. Positions already clean in y_t still get a
// row; callers ignore it. Throws if x + y_t exceed the configured context.
Matrix predict(const PolicyParams& params, const Sequence& y_t,
               const Sequence& x);

// Sum of log pi(y[k] | y_t, x) over the given positions, each of which must
// be masked in y_t. Probabilities are floored at 1e-12 before the log; an
// exact zero is reported as a numerics failure. When grads is non-null the
// gradient of (weight * sum) is accumulated.
double token_logprob_sum(const PolicyParams& params, const Vocabulary& vocab,
                         const Sequence& y, const Sequence& y_t,
                         const Sequence& x, const MaskPattern& positions,
                         double weight = 0.0, GradientBuffer* grads = nullptr);

// Applies the AdamW update and zeroes the buffer. Non-finite gradients
// abort before touching the parameters.
void optimizer_step(PolicyParams& params, GradientBuffer& grads,
                    AdamState& state);

// Deep immutable copy; evaluating it never touches any gradient buffer.
PolicyParams snapshot(const PolicyParams& params);

struct Checkpoint {
  PolicyParams params;
  AdamState adam;
  std::uint64_t seed = 0;
  long step = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Throws std::runtime_error when the stored config hash does not match the
// expected config (pass nullptr to skip the compatibility check).
Checkpoint load_checkpoint(const std::string& path,
                           const PolicyConfig* expected = nullptr);

}  // namespace maskrl::policy
