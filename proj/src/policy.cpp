#include "maskrl/policy.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace maskrl::policy {

namespace {

constexpr double kProbFloor = 1e-12;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t PolicyConfig::hash() const {
  return fnv1a("vocab=" + std::to_string(vocab_size) +
               ";dim=" + std::to_string(dim) +
               ";layers=" + std::to_string(layers) +
               ";ctx=" + std::to_string(max_ctx) +
               ";init=" + std::to_string(init_scale));
}

ParamTensors ParamTensors::zeros(const PolicyConfig& cfg) {
  ParamTensors t;
  t.embed = Matrix(cfg.vocab_size, cfg.dim);
  t.pos = Matrix(cfg.max_ctx, cfg.dim);
  t.blocks.resize(cfg.layers);
  for (auto& b : t.blocks) {
    b.ln1_g = Matrix(1, cfg.dim);
    b.ln1_b = Matrix(1, cfg.dim);
    b.wq = Matrix(cfg.dim, cfg.dim);
    b.wk = Matrix(cfg.dim, cfg.dim);
    b.wv = Matrix(cfg.dim, cfg.dim);
    b.ln2_g = Matrix(1, cfg.dim);
    b.ln2_b = Matrix(1, cfg.dim);
    b.w1 = Matrix(cfg.hidden(), cfg.dim);
    b.b1 = Matrix(1, cfg.hidden());
    b.w2 = Matrix(cfg.dim, cfg.hidden());
  }
  t.lnf_g = Matrix(1, cfg.dim);
  t.lnf_b = Matrix(1, cfg.dim);
  t.wout = Matrix(cfg.dim, cfg.vocab_size);
  return t;
}

std::vector<Matrix*> ParamTensors::all() {
  std::vector<Matrix*> out = {&embed, &pos};
  for (auto& b : blocks)
    for (Matrix* m : {&b.ln1_g, &b.ln1_b, &b.wq, &b.wk, &b.wv, &b.ln2_g,
                      &b.ln2_b, &b.w1, &b.b1, &b.w2})
      out.push_back(m);
  out.push_back(&lnf_g);
  out.push_back(&lnf_b);
  out.push_back(&wout);
  return out;
}

std::vector<const Matrix*> ParamTensors::all() const {
  std::vector<const Matrix*> out = {&embed, &pos};
  for (const auto& b : blocks)
    for (const Matrix* m : {&b.ln1_g, &b.ln1_b, &b.wq, &b.wk, &b.wv,
                            &b.ln2_g, &b.ln2_b, &b.w1, &b.b1, &b.w2})
      out.push_back(m);
  out.push_back(&lnf_g);
  out.push_back(&lnf_b);
  out.push_back(&wout);
  return out;
}

std::vector<std::string> ParamTensors::names() const {
  std::vector<std::string> out = {"embed", "pos"};
  for (std::size_t l = 0; l < blocks.size(); ++l)
    for (const char* base : {"ln1_g", "ln1_b", "wq", "wk", "wv", "ln2_g",
                             "ln2_b", "w1", "b1", "w2"})
      out.push_back(std::string(base) + std::to_string(l));
  out.push_back("lnf_g");
  out.push_back("lnf_b");
  out.push_back("wout");
  return out;
}

void ParamTensors::zero() {
  for (Matrix* m : all()) m->fill(0.0);
}

void ParamTensors::add_scaled(const ParamTensors& other, double scale) {
  auto dst = all();
  auto src = other.all();
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t j = 0; j < dst[i]->size(); ++j)
      dst[i]->data[j] += scale * src[i]->data[j];
}

bool ParamTensors::all_finite() const {
  for (const Matrix* m : all())
    if (!m->all_finite()) return false;
  return true;
}

PolicyParams PolicyParams::init(const PolicyConfig& cfg, Rng& rng) {
  PolicyParams p;
  p.cfg = cfg;
  p.w = ParamTensors::zeros(cfg);
  auto tensors = p.w.all();
  auto names = p.w.names();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& name = names[i];
    if (name.rfind("b1", 0) == 0) continue;  // biases start at zero
    if (name.find("ln") != std::string::npos) {
      // Norm gains start at one, offsets at zero.
      if (name.find("_g") != std::string::npos) tensors[i]->fill(1.0);
      continue;
    }
    // Internal layers start at working scale; the output projection starts
    // at init_scale so the initial policy is near uniform regardless.
    const double scale =
        name == "wout" ? cfg.init_scale : std::max(cfg.init_scale, 0.3);
    for (double& v : tensors[i]->data) {
      const double u1 = std::max(rng.next_double(), 1e-300);  // Box-Muller
      const double u2 = rng.next_double();
      v = scale * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
  }
  return p;
}

GradientBuffer GradientBuffer::zeros(const PolicyConfig& cfg) {
  GradientBuffer b;
  b.g = ParamTensors::zeros(cfg);
  return b;
}

void GradientBuffer::zero() {
  g.zero();
  samples = 0;
}

void GradientBuffer::add(const GradientBuffer& other) {
  g.add_scaled(other.g, 1.0);
  samples += other.samples;
}

AdamState AdamState::init(const PolicyConfig& cfg, double lr,
                          double weight_decay) {
  AdamState s;
  s.learning_rate = lr;
  s.weight_decay = weight_decay;
  s.m = ParamTensors::zeros(cfg);
  s.v = ParamTensors::zeros(cfg);
  return s;
}

namespace {

constexpr double kLnEps = 1e-5;

// Layer-norm activations: normalized rows and the inverse stddev per row.
struct LnActs {
  Matrix z;    // m x d normalized (pre-gain)
  Matrix out;  // m x d g*z + b
  std::vector<double> inv_sigma;
};

void ln_forward(const Matrix& g, const Matrix& b, const Matrix& in,
                LnActs& acts) {
  const std::size_t m = in.rows, d = in.cols;
  acts.z = Matrix(m, d);
  acts.out = Matrix(m, d);
  acts.inv_sigma.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = in.row(i);
    double mu = 0.0;
    for (std::size_t a = 0; a < d; ++a) mu += row[a];
    mu /= d;
    double var = 0.0;
    for (std::size_t a = 0; a < d; ++a)
      var += (row[a] - mu) * (row[a] - mu);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    acts.inv_sigma[i] = inv;
    double* zrow = acts.z.row(i);
    double* orow = acts.out.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      zrow[a] = (row[a] - mu) * inv;
      orow[a] = g(0, a) * zrow[a] + b(0, a);
    }
  }
}

// dout -> din (accumulated into din), gain/offset grads accumulated.
void ln_backward(const Matrix& g, const LnActs& acts, const Matrix& dout,
                 Matrix& dg, Matrix& db, Matrix& din) {
  const std::size_t m = acts.z.rows, d = acts.z.cols;
  for (std::size_t i = 0; i < m; ++i) {
    const double* drow = dout.row(i);
    const double* zrow = acts.z.row(i);
    double* dinrow = din.row(i);
    double mean_dz = 0.0, mean_dzz = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      dg(0, a) += drow[a] * zrow[a];
      db(0, a) += drow[a];
      const double dz = drow[a] * g(0, a);
      mean_dz += dz;
      mean_dzz += dz * zrow[a];
    }
    mean_dz /= d;
    mean_dzz /= d;
    const double inv = acts.inv_sigma[i];
    for (std::size_t a = 0; a < d; ++a) {
      const double dz = drow[a] * g(0, a);
      dinrow[a] += inv * (dz - mean_dz - zrow[a] * mean_dzz);
    }
  }
}

// Activations of one block over the full context.
struct BlockActs {
  LnActs ln1;      // pre-attention norm
  Matrix q, k, v;  // m x d from ln1.out
  Matrix attn;     // m x m softmax rows
  Matrix u;        // m x d attention residual output (in + attn)
  LnActs ln2;      // pre-hidden norm of u
  Matrix h;        // m x 4d tanh hidden from ln2.out
  Matrix out;      // m x d block output (u + w2 h)
};

// Forward activations for one (y_t, x) evaluation.
struct Forward {
  std::size_t lx = 0, ly = 0, d = 0, hd = 0, vsize = 0;
  std::vector<TokenId> ctx;
  Matrix e;  // m x d embeddings + position features
  std::vector<BlockActs> blocks;
  LnActs lnf;    // final norm of the top representation
  Matrix probs;  // ly x vsize
};

void run_block(const BlockTensors& w, const Matrix& in, std::size_t d,
               std::size_t hd, BlockActs& acts) {
  const std::size_t m = in.rows;
  ln_forward(w.ln1_g, w.ln1_b, in, acts.ln1);
  const Matrix& n1 = acts.ln1.out;

  auto project = [&](const Matrix& wmat, Matrix& out) {
    out = Matrix(m, d);
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = n1.row(i);
      double* o = out.row(i);
      for (std::size_t a = 0; a < d; ++a) {
        const double* wrow = wmat.row(a);
        double acc = 0.0;
        for (std::size_t b = 0; b < d; ++b) acc += wrow[b] * row[b];
        o[a] = acc;
      }
    }
  };
  project(w.wq, acts.q);
  project(w.wk, acts.k);
  project(w.wv, acts.v);

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  acts.attn = Matrix(m, m);
  acts.u = Matrix(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    double* arow = acts.attn.row(i);
    const double* qrow = acts.q.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double* krow = acts.k.row(j);
      double acc = 0.0;
      for (std::size_t a = 0; a < d; ++a) acc += qrow[a] * krow[a];
      arow[j] = acc * scale;
    }
    softmax_inplace(arow, m);
    double* urow = acts.u.row(i);
    const double* inrow = in.row(i);
    for (std::size_t a = 0; a < d; ++a) urow[a] = inrow[a];
    for (std::size_t j = 0; j < m; ++j) {
      const double aij = arow[j];
      const double* vrow = acts.v.row(j);
      for (std::size_t a = 0; a < d; ++a) urow[a] += aij * vrow[a];
    }
  }

  ln_forward(w.ln2_g, w.ln2_b, acts.u, acts.ln2);
  const Matrix& n2 = acts.ln2.out;
  acts.h = Matrix(m, hd);
  acts.out = Matrix(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    const double* nrow = n2.row(i);
    const double* urow = acts.u.row(i);
    double* hrow = acts.h.row(i);
    double* orow = acts.out.row(i);
    for (std::size_t a = 0; a < hd; ++a) {
      const double* wrow = w.w1.row(a);
      double acc = w.b1(0, a);
      for (std::size_t b = 0; b < d; ++b) acc += wrow[b] * nrow[b];
      hrow[a] = std::tanh(acc);
    }
    for (std::size_t a = 0; a < d; ++a) {
      const double* wrow = w.w2.row(a);
      double acc = urow[a];
      for (std::size_t k = 0; k < hd; ++k) acc += wrow[k] * hrow[k];
      orow[a] = acc;
    }
  }
}

void run_forward(const PolicyParams& p, const Sequence& y_t, const Sequence& x,
                 Forward& f) {
  const auto& cfg = p.cfg;
  const std::size_t lx = x.size(), ly = y_t.size(), m = lx + ly;
  if (m > cfg.max_ctx)
    throw std::invalid_argument("predict: context exceeds configured maximum");
  if (ly == 0) throw std::invalid_argument("predict: empty y_t");
  if (cfg.dim > 128)
    throw std::invalid_argument("predict: dim exceeds supported maximum 128");

  f.lx = lx;
  f.ly = ly;
  f.d = cfg.dim;
  f.hd = cfg.hidden();
  f.vsize = cfg.vocab_size;
  f.ctx.resize(m);
  for (std::size_t i = 0; i < lx; ++i) f.ctx[i] = x[i];
  for (std::size_t i = 0; i < ly; ++i) f.ctx[lx + i] = y_t[i];
  for (TokenId t : f.ctx)
    if (t >= cfg.vocab_size)
      throw std::invalid_argument("predict: token id outside vocabulary");

  const std::size_t d = cfg.dim;
  f.e = Matrix(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    const double* emb = p.w.embed.row(f.ctx[i]);
    const double* pe = p.w.pos.row(i);
    double* out = f.e.row(i);
    for (std::size_t a = 0; a < d; ++a) out[a] = emb[a] + pe[a];
  }

  f.blocks.resize(cfg.layers);
  const Matrix* in = &f.e;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    run_block(p.w.blocks[l], *in, d, f.hd, f.blocks[l]);
    in = &f.blocks[l].out;
  }
  ln_forward(p.w.lnf_g, p.w.lnf_b, *in, f.lnf);

  f.probs = Matrix(ly, f.vsize);
  for (std::size_t i = 0; i < ly; ++i) {
    const double* row = f.lnf.out.row(lx + i);
    double* prow = f.probs.row(i);
    for (std::size_t t = 0; t < f.vsize; ++t) prow[t] = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double ua = row[a];
      const double* wrow = p.w.wout.row(a);
      for (std::size_t t = 0; t < f.vsize; ++t) prow[t] += ua * wrow[t];
    }
    softmax_inplace(prow, f.vsize);
  }
}

// Backward through one block: din receives the gradient w.r.t. the block's
// input, dout holds the gradient w.r.t. its output (consumed).
void block_backward(const BlockTensors& w, const Matrix& in,
                    const BlockActs& acts, const Matrix& dout,
                    BlockTensors& g, Matrix& din) {
  const std::size_t m = in.rows, d = in.cols, hd = acts.h.cols;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix du(m, d);
  Matrix dn2(m, d);
  // out = u + w2 tanh(w1 ln2(u) + b1)
  for (std::size_t i = 0; i < m; ++i) {
    const double* drow = dout.row(i);
    const double* hrow = acts.h.row(i);
    const double* nrow = acts.ln2.out.row(i);
    double* durow = du.row(i);
    double* dnrow = dn2.row(i);
    double dh[512];
    for (std::size_t a = 0; a < d; ++a) durow[a] = drow[a];
    for (std::size_t k = 0; k < hd; ++k) dh[k] = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      double* grow = g.w2.row(a);
      const double* wrow = w.w2.row(a);
      const double da = drow[a];
      for (std::size_t k = 0; k < hd; ++k) {
        grow[k] += da * hrow[k];
        dh[k] += da * wrow[k];
      }
    }
    for (std::size_t k = 0; k < hd; ++k) {
      const double dpre = dh[k] * (1.0 - hrow[k] * hrow[k]);
      g.b1(0, k) += dpre;
      double* grow = g.w1.row(k);
      const double* wrow = w.w1.row(k);
      for (std::size_t b = 0; b < d; ++b) {
        grow[b] += dpre * nrow[b];
        dnrow[b] += dpre * wrow[b];
      }
    }
  }
  ln_backward(w.ln2_g, acts.ln2, dn2, g.ln2_g, g.ln2_b, du);

  // u = in + sum_j attn_ij v_j where q, k, v come from ln1(in).
  din = Matrix(m, d);
  Matrix dn1(m, d);
  Matrix dq(m, d), dk(m, d), dv(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    const double* durow = du.row(i);
    double* dinrow = din.row(i);
    for (std::size_t a = 0; a < d; ++a) dinrow[a] += durow[a];

    const double* arow = acts.attn.row(i);
    std::vector<double> da(m);
    double dot = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double* vrow = acts.v.row(j);
      double acc = 0.0;
      for (std::size_t a = 0; a < d; ++a) acc += durow[a] * vrow[a];
      da[j] = acc;
      dot += arow[j] * acc;
      double* dvrow = dv.row(j);
      for (std::size_t a = 0; a < d; ++a) dvrow[a] += arow[j] * durow[a];
    }
    const double* qrow = acts.q.row(i);
    double* dqrow = dq.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double ds = arow[j] * (da[j] - dot) * scale;
      const double* krow = acts.k.row(j);
      double* dkrow = dk.row(j);
      for (std::size_t a = 0; a < d; ++a) {
        dqrow[a] += ds * krow[a];
        dkrow[a] += ds * qrow[a];
      }
    }
  }

  // q = wq n1, k = wk n1, v = wv n1
  const Matrix& n1 = acts.ln1.out;
  for (std::size_t j = 0; j < m; ++j) {
    const double* nrow = n1.row(j);
    double* dnrow = dn1.row(j);
    const double* dqrow = dq.row(j);
    const double* dkrow = dk.row(j);
    const double* dvrow = dv.row(j);
    for (std::size_t a = 0; a < d; ++a) {
      const double dqa = dqrow[a], dka = dkrow[a], dva = dvrow[a];
      double* gq = g.wq.row(a);
      double* gk = g.wk.row(a);
      double* gv = g.wv.row(a);
      const double* wq = w.wq.row(a);
      const double* wk = w.wk.row(a);
      const double* wv = w.wv.row(a);
      for (std::size_t b = 0; b < d; ++b) {
        gq[b] += dqa * nrow[b];
        gk[b] += dka * nrow[b];
        gv[b] += dva * nrow[b];
        dnrow[b] += dqa * wq[b] + dka * wk[b] + dva * wv[b];
      }
    }
  }
  ln_backward(w.ln1_g, acts.ln1, dn1, g.ln1_g, g.ln1_b, din);
}

// Accumulates the gradient of sum_i <dlogits[i], logits[i]>.
void run_backward(const PolicyParams& p, const Forward& f,
                  const Matrix& dlogits, ParamTensors& g) {
  const std::size_t d = f.d, m = f.lx + f.ly;
  const std::size_t nblocks = f.blocks.size();

  // Head: logits = wout^T lnf(top)[response rows].
  Matrix dnf(m, d);
  for (std::size_t i = 0; i < f.ly; ++i) {
    const double* dlrow = dlogits.row(i);
    const double* nrow = f.lnf.out.row(f.lx + i);
    double* drow = dnf.row(f.lx + i);
    for (std::size_t a = 0; a < d; ++a) {
      const double* wrow = p.w.wout.row(a);
      double acc = 0.0;
      for (std::size_t t = 0; t < f.vsize; ++t) acc += dlrow[t] * wrow[t];
      drow[a] = acc;
      double* grow = g.wout.row(a);
      const double na = nrow[a];
      for (std::size_t t = 0; t < f.vsize; ++t) grow[t] += na * dlrow[t];
    }
  }
  Matrix dtop(m, d);
  ln_backward(p.w.lnf_g, f.lnf, dnf, g.lnf_g, g.lnf_b, dtop);

  for (std::size_t l = nblocks; l-- > 0;) {
    const Matrix& in = l == 0 ? f.e : f.blocks[l - 1].out;
    Matrix din;
    block_backward(p.w.blocks[l], in, f.blocks[l], dtop, g.blocks[l], din);
    dtop = std::move(din);
  }

  for (std::size_t j = 0; j < m; ++j) {
    const double* derow = dtop.row(j);
    double* gemb = g.embed.row(f.ctx[j]);
    double* gpos = g.pos.row(j);
    for (std::size_t a = 0; a < d; ++a) {
      gemb[a] += derow[a];
      gpos[a] += derow[a];
    }
  }
}

}  // namespace

Matrix predict(const PolicyParams& params, const Sequence& y_t,
               const Sequence& x) {
  Forward f;
  run_forward(params, y_t, x, f);
  return std::move(f.probs);
}

double token_logprob_sum(const PolicyParams& params, const Vocabulary& vocab,
                         const Sequence& y, const Sequence& y_t,
                         const Sequence& x, const MaskPattern& positions,
                         double weight, GradientBuffer* grads) {
  if (y.size() != y_t.size())
    throw std::invalid_argument("token_logprob_sum: y / y_t length mismatch");
  for (std::size_t pos : positions) {
    if (pos >= y_t.size() || y_t[pos] != vocab.mask_id)
      throw std::invalid_argument(
          "token_logprob_sum: position not masked in y_t");
    if (y[pos] == vocab.mask_id)
      throw std::invalid_argument("token_logprob_sum: y masked at position");
  }
  if (positions.empty()) return 0.0;

  Forward f;
  run_forward(params, y_t, x, f);

  double total = 0.0;
  for (std::size_t pos : positions) {
    const double pr = f.probs(pos, y[pos]);
    if (pr == 0.0)
      throw std::runtime_error("token_logprob_sum: zero probability");
    total += std::log(std::max(pr, kProbFloor));
  }

  if (grads != nullptr && weight != 0.0) {
    Matrix dlogits(f.ly, f.vsize);
    for (std::size_t pos : positions) {
      const double* prow = f.probs.row(pos);
      double* drow = dlogits.row(pos);
      for (std::size_t t = 0; t < f.vsize; ++t) drow[t] -= weight * prow[t];
      drow[y[pos]] += weight;
    }
    run_backward(params, f, dlogits, grads->g);
    grads->samples += 1;
  }
  return total;
}

void optimizer_step(PolicyParams& params, GradientBuffer& grads,
                    AdamState& state) {
  if (grads.samples == 0)
    throw std::invalid_argument("optimizer_step: empty gradient buffer");
  if (!grads.all_finite())
    throw std::runtime_error("optimizer_step: non-finite gradient");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);

  auto ps = params.w.all();
  auto gs = grads.g.all();
  auto ms = state.m.all();
  auto vs = state.v.all();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    double* p = ps[i]->data.data();
    double* g = gs[i]->data.data();
    double* m = ms[i]->data.data();
    double* v = vs[i]->data.data();
    const std::size_t n = ps[i]->size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= state.learning_rate *
              (mhat / (std::sqrt(vhat) + state.eps) +
               state.weight_decay * p[j]);
    }
  }
  grads.zero();
}

PolicyParams snapshot(const PolicyParams& params) { return params; }

namespace {

nlohmann::json tensors_to_json(const ParamTensors& t) {
  nlohmann::json j;
  auto arrays = t.all();
  auto names = t.names();
  for (std::size_t i = 0; i < arrays.size(); ++i) j[names[i]] = arrays[i]->data;
  return j;
}

void tensors_from_json(const nlohmann::json& j, ParamTensors& t) {
  auto arrays = t.all();
  auto names = t.names();
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const auto vec = j.at(names[i]).get<std::vector<double>>();
    if (vec.size() != arrays[i]->size())
      throw std::runtime_error("checkpoint: tensor size mismatch");
    arrays[i]->data = vec;
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json j;
  j["config"] = {{"vocab_size", ckpt.params.cfg.vocab_size},
                 {"dim", ckpt.params.cfg.dim},
                 {"layers", ckpt.params.cfg.layers},
                 {"max_ctx", ckpt.params.cfg.max_ctx},
                 {"init_scale", ckpt.params.cfg.init_scale}};
  j["config_hash"] = ckpt.params.cfg.hash();
  j["step"] = ckpt.step;
  j["seed"] = ckpt.seed;
  j["params"] = tensors_to_json(ckpt.params.w);
  j["adam"] = {{"learning_rate", ckpt.adam.learning_rate},
               {"beta1", ckpt.adam.beta1},
               {"beta2", ckpt.adam.beta2},
               {"eps", ckpt.adam.eps},
               {"weight_decay", ckpt.adam.weight_decay},
               {"step", ckpt.adam.step},
               {"m", tensors_to_json(ckpt.adam.m)},
               {"v", tensors_to_json(ckpt.adam.v)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump();
}

Checkpoint load_checkpoint(const std::string& path,
                           const PolicyConfig* expected) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;

  PolicyConfig cfg;
  cfg.vocab_size = j.at("config").at("vocab_size").get<std::size_t>();
  cfg.dim = j.at("config").at("dim").get<std::size_t>();
  cfg.layers = j.at("config").at("layers").get<std::size_t>();
  cfg.max_ctx = j.at("config").at("max_ctx").get<std::size_t>();
  cfg.init_scale = j.at("config").at("init_scale").get<double>();

  if (expected != nullptr && expected->hash() != cfg.hash())
    throw std::runtime_error("checkpoint config hash mismatch");
  if (j.at("config_hash").get<std::uint64_t>() != cfg.hash())
    throw std::runtime_error("checkpoint config hash mismatch");

  Checkpoint ckpt;
  ckpt.params.cfg = cfg;
  ckpt.params.w = ParamTensors::zeros(cfg);
  tensors_from_json(j.at("params"), ckpt.params.w);
  ckpt.step = j.at("step").get<long>();
  ckpt.seed = j.at("seed").get<std::uint64_t>();

  const auto& ja = j.at("adam");
  ckpt.adam = AdamState::init(cfg, ja.at("learning_rate").get<double>(),
                              ja.at("weight_decay").get<double>());
  ckpt.adam.beta1 = ja.at("beta1").get<double>();
  ckpt.adam.beta2 = ja.at("beta2").get<double>();
  ckpt.adam.eps = ja.at("eps").get<double>();
  ckpt.adam.step = ja.at("step").get<long>();
  tensors_from_json(ja.at("m"), ckpt.adam.m);
  tensors_from_json(ja.at("v"), ckpt.adam.v);
  return ckpt;
}

}  // namespace maskrl::policy
