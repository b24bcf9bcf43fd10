#include "maskrl/likelihood.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace maskrl;
using likelihood::Estimator;
using maskrl::test::small_case;
using maskrl::test::uniform_policy;

TEST_CASE("weight function") {
  CHECK(likelihood::estimator_weight(Estimator::CompW1, 0.1) == 1.0);
  CHECK(likelihood::estimator_weight(Estimator::Mc1Uniform, 0.1) /
            likelihood::estimator_weight(Estimator::Mc1Uniform, 0.9) ==
        doctest::Approx(9.0));
  CHECK_THROWS_AS(likelihood::estimator_weight(Estimator::CompWinv, 0.0),
                  std::invalid_argument);
}

TEST_CASE("estimator name round trip") {
  for (auto e : {Estimator::D1Full, Estimator::Mc1Uniform, Estimator::Mc2Iid,
                 Estimator::CompW1, Estimator::CompWinv})
    CHECK(likelihood::estimator_from_string(likelihood::estimator_to_string(
              e)) == e);
  CHECK_THROWS_AS(likelihood::estimator_from_string("bogus"),
                  std::invalid_argument);
}

TEST_CASE("d1_full on the uniform predictor is exact and deterministic") {
  const auto v = Vocabulary::generic(8);
  const auto p = uniform_policy(8);
  const Sequence y = {1, 2, 3, 4, 5, 6};
  Rng r1(5), r2(6);
  const auto a = likelihood::estimate_loglik(Estimator::D1Full, p, v, y, {}, r1);
  const auto b = likelihood::estimate_loglik(Estimator::D1Full, p, v, y, {}, r2);
  CHECK(a.value == doctest::Approx(6.0 * std::log(1.0 / 8.0)));
  CHECK(a.value == b.value);  // zero variance across draws
  CHECK(a.samples.size() == 1);
  CHECK(a.samples[0].positions.size() == 6);
}

TEST_CASE("complementary estimators cover every position exactly once") {
  auto c = small_case(401, 8, 8, 6, 0);
  for (auto e : {Estimator::CompW1, Estimator::CompWinv}) {
    Rng rng(7);
    for (int draw = 0; draw < 200; ++draw) {
      Rng d = rng.split(draw);
      const auto res =
          likelihood::estimate_loglik(e, c.params, c.vocab, c.y, c.x, d);
      REQUIRE(res.samples.size() == 2);
      std::vector<int> seen(c.y.size(), 0);
      for (const auto& s : res.samples)
        for (auto pos : s.positions) seen[pos]++;
      for (int n : seen) CHECK(n == 1);
    }
  }
}

TEST_CASE("comp_w1 halves the full coverage sum on the uniform predictor") {
  const auto v = Vocabulary::generic(8);
  const auto p = uniform_policy(8);
  const Sequence y = {1, 2, 3, 4, 5, 6};
  Rng rng(8);
  const auto res =
      likelihood::estimate_loglik(Estimator::CompW1, p, v, y, {}, rng);
  CHECK(res.value == doctest::Approx(3.0 * std::log(1.0 / 8.0)));
}

TEST_CASE("exact_expected matches the analytic uniform cases") {
  const auto v = Vocabulary::generic(8);
  const auto p = uniform_policy(8);
  const Sequence y = {1, 2, 3, 4, 5, 6};
  CHECK(likelihood::exact_expected(Estimator::D1Full, p, v, y, {}) ==
        doctest::Approx(6.0 * std::log(1.0 / 8.0)));
  // Uniform predictor: every pattern sums |m| * log(1/8); the halved
  // complementary pair always totals (L/2) log(1/8).
  CHECK(likelihood::exact_expected(Estimator::CompW1, p, v, y, {}) ==
        doctest::Approx(3.0 * std::log(1.0 / 8.0)));
  // mc1 with w = 1/t: E[(1/t) * |m|] * log(1/8) = L log(1/8).
  CHECK(likelihood::exact_expected(Estimator::Mc1Uniform, p, v, y, {}) ==
        doctest::Approx(6.0 * std::log(1.0 / 8.0)).epsilon(1e-6));
  CHECK_THROWS_AS(likelihood::exact_expected(Estimator::CompW1, p, v,
                                             Sequence(9, 1), {}),
                  std::invalid_argument);
}

TEST_CASE("estimates are unbiased against the enumeration oracle") {
  // 2 random policies x 5 estimators, 4000 draws each, 4 standard errors.
  for (std::uint64_t seed : {402, 403}) {
    auto c = small_case(seed, 8, 8, 6, 0);
    for (auto e : {Estimator::D1Full, Estimator::Mc1Uniform,
                   Estimator::Mc2Iid, Estimator::CompW1,
                   Estimator::CompWinv}) {
      const double exact =
          likelihood::exact_expected(e, c.params, c.vocab, c.y, c.x);
      Rng rng(seed * 31 + static_cast<int>(e));
      const int draws = 4000;
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < draws; ++i) {
        Rng d = rng.split(i);
        const double val = likelihood::estimate_loglik(e, c.params, c.vocab,
                                                       c.y, c.x, d)
                               .value;
        sum += val;
        sq += val * val;
      }
      const double mean = sum / draws;
      const double se =
          std::sqrt(std::max(sq / draws - mean * mean, 0.0) / draws);
      if (e == Estimator::D1Full) {
        CHECK(std::abs(mean - exact) < 1e-9);
      } else {
        CHECK(std::abs(mean - exact) <= 4.0 * se);
      }
    }
  }
}

TEST_CASE("estimator gradients match finite differences") {
  for (auto e : {Estimator::Mc1Uniform, Estimator::CompW1}) {
    auto c = small_case(404, 8, 8, 5, 1);
    auto grads = policy::GradientBuffer::zeros(c.params.cfg);
    Rng g_rng(9);
    likelihood::estimate_loglik(e, c.params, c.vocab, c.y, c.x, g_rng, 1.0,
                                &grads);

    // Wider step than the raw-logprob check: the 1/t weight amplifies the
    // value, and with it the cancellation error of the central difference.
    const double h = 1e-4;
    auto tensors = c.params.w.all();
    auto gts = grads.g.all();
    double worst = 0.0;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      for (std::size_t j = 0; j < tensors[t]->size(); ++j) {
        double& coord = tensors[t]->data[j];
        const double saved = coord;
        Rng rp(9), rm(9);
        coord = saved + h;
        const double fp = likelihood::estimate_loglik(e, c.params, c.vocab,
                                                      c.y, c.x, rp)
                              .value;
        coord = saved - h;
        const double fm = likelihood::estimate_loglik(e, c.params, c.vocab,
                                                      c.y, c.x, rm)
                              .value;
        coord = saved;
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, std::abs(gts[t]->data[j] - fd) /
                                    std::max(std::abs(fd), 1e-6));
      }
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("sft_loss is the negated estimate with loss-direction gradients") {
  const auto v = Vocabulary::generic(8);
  const auto p = uniform_policy(8);
  const Sequence y = {1, 2, 3, 4, 5, 6};
  Rng r1(10), r2(11);
  // comp_w1 covers all positions, so the uniform loss is rng-invariant.
  const double l1 = likelihood::sft_loss(p, v, y, {}, Estimator::CompW1, r1);
  const double l2 = likelihood::sft_loss(p, v, y, {}, Estimator::CompW1, r2);
  CHECK(l1 == doctest::Approx(3.0 * std::log(8.0)));
  CHECK(l1 == doctest::Approx(l2));

  auto c = small_case(405);
  auto g_est = policy::GradientBuffer::zeros(c.params.cfg);
  auto g_loss = policy::GradientBuffer::zeros(c.params.cfg);
  Rng ra(12), rb(12);
  likelihood::estimate_loglik(Estimator::CompW1, c.params, c.vocab, c.y, c.x,
                              ra, 1.0, &g_est);
  likelihood::sft_loss(c.params, c.vocab, c.y, c.x, Estimator::CompW1, rb,
                       &g_loss);
  auto te = g_est.g.all();
  auto tl = g_loss.g.all();
  for (std::size_t t = 0; t < te.size(); ++t)
    for (std::size_t j = 0; j < te[t]->size(); ++j)
      CHECK(tl[t]->data[j] == doctest::Approx(-te[t]->data[j]).epsilon(1e-12));
}

TEST_CASE("training on sft_loss reduces it") {
  auto c = small_case(406, 8, 16, 6, 2, 0.02);
  Rng data(13);
  std::vector<std::pair<Sequence, Sequence>> pairs;
  for (int i = 0; i < 32; ++i) {
    Sequence y;
    for (int j = 0; j < 6; ++j)
      y.push_back(static_cast<TokenId>(1 + data.next_below(7)));
    Sequence x = {static_cast<TokenId>(1 + data.next_below(7))};
    pairs.emplace_back(y, x);
  }
  auto grads = policy::GradientBuffer::zeros(c.params.cfg);
  auto adam = policy::AdamState::init(c.params.cfg, 0.01, 0.0);
  std::vector<double> losses;
  Rng loop(14);
  for (int step = 0; step < 500; ++step) {
    Rng step_rng = loop.split(step);
    const auto& [y, x] = pairs[step % pairs.size()];
    losses.push_back(likelihood::sft_loss(c.params, c.vocab, y, x,
                                          Estimator::CompW1, step_rng,
                                          &grads));
    policy::optimizer_step(c.params, grads, adam);
  }
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 50; ++i) head += losses[i];
  for (int i = 450; i < 500; ++i) tail += losses[i];
  CHECK(tail < head);
}
