#include "maskrl/policy.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>

using namespace maskrl;
using maskrl::test::small_case;

TEST_CASE("predict rows are normalized and deterministic") {
  auto c = small_case(101);
  const auto p1 = policy::predict(c.params, c.y_t, c.x);
  const auto p2 = policy::predict(c.params, c.y_t, c.x);
  CHECK(p1.data == p2.data);
  for (std::size_t i = 0; i < p1.rows; ++i) {
    double sum = 0.0;
    for (std::size_t t = 0; t < p1.cols; ++t) sum += p1(i, t);
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("fresh init stays within 10x of uniform") {
  auto c = small_case(102, 8, 8, 6, 2, 0.02);
  const auto probs = policy::predict(c.params, c.y_t, c.x);
  const double uniform = 1.0 / c.vocab.size();
  for (double v : probs.data) {
    CHECK(v <= 10.0 * uniform);
    CHECK(v >= 0.1 * uniform);
  }
}

TEST_CASE("zeroed position features make the mixer permutation-equivariant") {
  auto c = small_case(103);
  c.params.w.pos.fill(0.0);
  Sequence y_t = c.y_t;
  y_t[0] = 1;
  y_t[1] = 2;  // distinct tokens at the swapped slots
  const auto before = policy::predict(c.params, y_t, c.x);
  std::swap(y_t[0], y_t[1]);
  const auto after = policy::predict(c.params, y_t, c.x);
  for (std::size_t t = 0; t < before.cols; ++t) {
    CHECK(before(0, t) == doctest::Approx(after(1, t)).epsilon(1e-12));
    CHECK(before(1, t) == doctest::Approx(after(0, t)).epsilon(1e-12));
  }
}

TEST_CASE("predict rejects oversized context") {
  auto c = small_case(104);
  Sequence long_x(20, 1);
  CHECK_THROWS_AS(policy::predict(c.params, c.y_t, long_x),
                  std::invalid_argument);
}

TEST_CASE("token_logprob_sum basics") {
  auto c = small_case(105);

  SUBCASE("empty positions give zero and no gradient") {
    auto grads = policy::GradientBuffer::zeros(c.params.cfg);
    const double v = policy::token_logprob_sum(c.params, c.vocab, c.y, c.y_t,
                                               c.x, {}, 1.0, &grads);
    CHECK(v == 0.0);
    CHECK(grads.samples == 0);
  }
  SUBCASE("uniform predictor gives |positions| * log(1/V)") {
    const auto uni = maskrl::test::uniform_policy(c.vocab.size());
    MaskPattern four(c.positions.begin(),
                     c.positions.begin() +
                         std::min<std::size_t>(4, c.positions.size()));
    Sequence y_t(c.y.size(), c.vocab.mask_id);
    const double v =
        policy::token_logprob_sum(uni, c.vocab, c.y, y_t, c.x, four);
    CHECK(v == doctest::Approx(four.size() * std::log(1.0 / 8.0)));
  }
  SUBCASE("rejects positions that are not masked") {
    Sequence y_t = c.y;  // nothing masked
    CHECK_THROWS_AS(
        policy::token_logprob_sum(c.params, c.vocab, c.y, y_t, c.x, {0}),
        std::invalid_argument);
  }
}

TEST_CASE("gradient matches central finite differences") {
  // The gradient oracle: every coordinate of every tensor within 1e-4
  // relative of (f(p+h) - f(p-h)) / 2h.
  for (std::uint64_t seed : {201, 202, 203}) {
    auto c = small_case(seed);
    auto grads = policy::GradientBuffer::zeros(c.params.cfg);
    policy::token_logprob_sum(c.params, c.vocab, c.y, c.y_t, c.x, c.positions,
                              1.0, &grads);

    const double h = 1e-5;
    auto tensors = c.params.w.all();
    auto gts = grads.g.all();
    double worst = 0.0;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      for (std::size_t j = 0; j < tensors[t]->size(); ++j) {
        double& coord = tensors[t]->data[j];
        const double saved = coord;
        coord = saved + h;
        const double fp = policy::token_logprob_sum(c.params, c.vocab, c.y,
                                                    c.y_t, c.x, c.positions);
        coord = saved - h;
        const double fm = policy::token_logprob_sum(c.params, c.vocab, c.y,
                                                    c.y_t, c.x, c.positions);
        coord = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double an = gts[t]->data[j];
        const double diff = std::abs(an - fd);
        if (diff <= 1e-6) continue;  // absolute floor
        worst = std::max(worst, diff / std::max(std::abs(an), std::abs(fd)));
      }
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("gradient scales linearly with the weight") {
  auto c = small_case(204);
  auto g1 = policy::GradientBuffer::zeros(c.params.cfg);
  auto g2 = policy::GradientBuffer::zeros(c.params.cfg);
  policy::token_logprob_sum(c.params, c.vocab, c.y, c.y_t, c.x, c.positions,
                            1.0, &g1);
  policy::token_logprob_sum(c.params, c.vocab, c.y, c.y_t, c.x, c.positions,
                            -2.5, &g2);
  auto t1 = g1.g.all();
  auto t2 = g2.g.all();
  for (std::size_t t = 0; t < t1.size(); ++t)
    for (std::size_t j = 0; j < t1[t]->size(); ++j)
      CHECK(t2[t]->data[j] ==
            doctest::Approx(-2.5 * t1[t]->data[j]).epsilon(1e-12));
}

TEST_CASE("optimizer_step behavior") {
  auto c = small_case(301);

  SUBCASE("zero gradient moves parameters only via weight decay") {
    auto grads = policy::GradientBuffer::zeros(c.params.cfg);
    grads.samples = 1;
    auto adam = policy::AdamState::init(c.params.cfg, 0.1, 0.0);
    const auto before = c.params.w.embed.data;
    policy::optimizer_step(c.params, grads, adam);
    CHECK(c.params.w.embed.data == before);

    auto adam_wd = policy::AdamState::init(c.params.cfg, 0.1, 0.01);
    grads.samples = 1;
    policy::optimizer_step(c.params, grads, adam_wd);
    CHECK(c.params.w.embed.data != before);
  }
  SUBCASE("constant gradient moves opposite its sign") {
    auto grads = policy::GradientBuffer::zeros(c.params.cfg);
    auto adam = policy::AdamState::init(c.params.cfg, 0.01, 0.0);
    const double start = c.params.w.blocks[0].wq(0, 0);
    for (int i = 0; i < 50; ++i) {
      grads.g.blocks[0].wq(0, 0) = 2.0;
      grads.samples = 1;
      policy::optimizer_step(c.params, grads, adam);
    }
    CHECK(c.params.w.blocks[0].wq(0, 0) < start);
  }
  SUBCASE("non-finite gradients abort") {
    auto grads = policy::GradientBuffer::zeros(c.params.cfg);
    grads.g.blocks[0].wq(0, 0) = std::numeric_limits<double>::quiet_NaN();
    grads.samples = 1;
    auto adam = policy::AdamState::init(c.params.cfg, 0.01, 0.0);
    CHECK_THROWS_AS(policy::optimizer_step(c.params, grads, adam),
                    std::runtime_error);
  }
  SUBCASE("quadratic toy loss converges to its minimum") {
    // Minimize 0.5 * (w - target)^2 on a single coordinate.
    policy::PolicyConfig tiny;
    tiny.vocab_size = 8;
    tiny.dim = 8;
    Rng rng(5);
    auto params = policy::PolicyParams::init(tiny, rng);
    auto grads = policy::GradientBuffer::zeros(tiny);
    auto adam = policy::AdamState::init(tiny, 0.01, 0.0);
    const double target = 0.7;
    for (int i = 0; i < 5000; ++i) {
      grads.g.blocks[0].wq(0, 0) = params.w.blocks[0].wq(0, 0) - target;
      grads.samples = 1;
      policy::optimizer_step(params, grads, adam);
    }
    CHECK(std::abs(params.w.blocks[0].wq(0, 0) - target) <= 1e-4);
  }
}

TEST_CASE("snapshot is frozen against later updates") {
  auto c = small_case(302);
  const auto snap = policy::snapshot(c.params);
  const auto before = policy::predict(snap, c.y_t, c.x);

  auto grads = policy::GradientBuffer::zeros(c.params.cfg);
  policy::token_logprob_sum(c.params, c.vocab, c.y, c.y_t, c.x, c.positions,
                            1.0, &grads);
  auto adam = policy::AdamState::init(c.params.cfg, 0.05, 0.0);
  policy::optimizer_step(c.params, grads, adam);

  const auto after = policy::predict(snap, c.y_t, c.x);
  CHECK(before.data == after.data);
  CHECK(policy::predict(c.params, c.y_t, c.x).data != before.data);
}

TEST_CASE("checkpoint round trip is exact and hash-guarded") {
  auto c = small_case(303);
  policy::Checkpoint ckpt;
  ckpt.params = c.params;
  ckpt.adam = policy::AdamState::init(c.params.cfg, 0.02, 0.0);
  ckpt.adam.m.blocks[0].wq(1, 1) = 0.125;
  ckpt.seed = 77;
  ckpt.step = 12;

  const std::string path = "test_checkpoint.json";
  policy::save_checkpoint(path, ckpt);
  const auto loaded = policy::load_checkpoint(path, &c.params.cfg);
  CHECK(loaded.params.w.embed.data == c.params.w.embed.data);
  CHECK(loaded.adam.m.blocks[0].wq(1, 1) == 0.125);
  CHECK(loaded.seed == 77);
  CHECK(loaded.step == 12);

  policy::PolicyConfig other = c.params.cfg;
  other.dim = 4;
  CHECK_THROWS_AS(policy::load_checkpoint(path, &other), std::runtime_error);
  std::remove(path.c_str());
}
