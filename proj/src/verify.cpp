#include "maskrl/verify.hpp"

#include "maskrl/diffusion.hpp"
#include "maskrl/likelihood.hpp"
#include "maskrl/objectives.hpp"
#include "maskrl/policy.hpp"
#include "maskrl/reward_net.hpp"
#include "maskrl/rewards.hpp"
#include "maskrl/rollout.hpp"
#include "maskrl/tasks.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <sstream>

namespace maskrl::harness {

namespace {

using likelihood::Estimator;
using policy::GradientBuffer;
using policy::PolicyConfig;
using policy::PolicyParams;

struct TestInstance {
  PolicyParams params;
  Vocabulary vocab;
  Sequence y, y_t, x;
  MaskPattern positions;
};

TestInstance make_instance(std::uint64_t seed, std::size_t vocab_size = 8,
                           std::size_t dim = 8, std::size_t len = 5,
                           std::size_t xlen = 2) {
  TestInstance ti;
  ti.vocab = Vocabulary::generic(vocab_size);
  PolicyConfig pc;
  pc.vocab_size = ti.vocab.size();
  pc.dim = dim;
  pc.max_ctx = 16;
  pc.init_scale = 0.05;
  Rng rng(seed);
  Rng init = rng.split(0);
  ti.params = PolicyParams::init(pc, init);

  Rng data = rng.split(1);
  auto content = [&](Rng& r) {
    return static_cast<TokenId>(1 + r.next_below(vocab_size - 1));
  };
  for (std::size_t i = 0; i < len; ++i) ti.y.push_back(content(data));
  for (std::size_t i = 0; i < xlen; ++i) ti.x.push_back(content(data));
  ti.y_t = ti.y;
  for (std::size_t i = 0; i < len; ++i) {
    if (data.next_double() < 0.6) {
      ti.y_t[i] = ti.vocab.mask_id;
      ti.positions.push_back(i);
    }
  }
  if (ti.positions.empty()) {
    ti.y_t[0] = ti.vocab.mask_id;
    ti.positions.push_back(0);
  }
  return ti;
}

// Max relative discrepancy between two gradient buffers, with an absolute
// floor below which coordinates are considered equal.
double max_rel_diff(const GradientBuffer& a, const GradientBuffer& b,
                    double abs_floor) {
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

SuiteResult finite_difference_suite(const VerifyOptions& opts) {
  SuiteResult res;
  res.name = "finite_differences";
  res.passed = true;
  double worst = 0.0;

  for (int c = 0; c < 4; ++c) {
    auto ti = make_instance(opts.seed + c);
    GradientBuffer grads = GradientBuffer::zeros(ti.params.cfg);
    policy::token_logprob_sum(ti.params, ti.vocab, ti.y, ti.y_t, ti.x,
                              ti.positions, 1.0, &grads);
    if (opts.corrupt_gradient && c == 0) grads.g.embed.data[3] += 0.01;

    const double h = 1e-5;
    auto tensors = ti.params.w.all();
    auto gtensors = grads.g.all();
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      for (std::size_t j = 0; j < tensors[t]->size(); ++j) {
        double& coord = tensors[t]->data[j];
        const double saved = coord;
        coord = saved + h;
        const double fp = policy::token_logprob_sum(
            ti.params, ti.vocab, ti.y, ti.y_t, ti.x, ti.positions);
        coord = saved - h;
        const double fm = policy::token_logprob_sum(
            ti.params, ti.vocab, ti.y, ti.y_t, ti.x, ti.positions);
        coord = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double an = gtensors[t]->data[j];
        // Relative tolerance with a 1e-6 absolute floor on the discrepancy.
        const double diff = std::abs(an - fd);
        if (diff <= 1e-6) continue;
        worst = std::max(worst, diff / std::max(std::abs(an), std::abs(fd)));
      }
    }
  }
  res.passed = worst <= 1e-4;
  std::ostringstream d;
  d << "max relative error " << worst << " (tolerance 1e-4)";
  res.detail = d.str();
  return res;
}

SuiteResult estimator_suite(const VerifyOptions& opts) {
  SuiteResult res;
  res.name = "estimator_enumeration";
  res.passed = true;
  std::ostringstream detail;

  const Estimator methods[] = {Estimator::D1Full, Estimator::Mc1Uniform,
                               Estimator::Mc2Iid, Estimator::CompW1,
                               Estimator::CompWinv};
  for (int p = 0; p < 2 && res.passed; ++p) {
    auto ti = make_instance(opts.seed + 100 + p, 8, 8, 6, 0);
    for (Estimator e : methods) {
      const double exact =
          likelihood::exact_expected(e, ti.params, ti.vocab, ti.y, ti.x);
      Rng rng(opts.seed + 17 * p + static_cast<int>(e));
      const int draws = 4000;
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < draws; ++i) {
        Rng draw = rng.split(i);
        const double v = likelihood::estimate_loglik(e, ti.params, ti.vocab,
                                                     ti.y, ti.x, draw)
                             .value;
        sum += v;
        sq += v * v;
      }
      const double mean = sum / draws;
      const double var = std::max(sq / draws - mean * mean, 0.0);
      const double se = std::sqrt(var / draws);
      const double gap = std::abs(mean - exact);
      const bool ok = e == Estimator::D1Full ? gap < 1e-9 : gap <= 4.0 * se;
      if (!ok) {
        res.passed = false;
        detail << likelihood::estimator_to_string(e) << ": |" << mean << " - "
               << exact << "| > 4se(" << se << "); ";
      }
    }
  }
  if (res.passed) res.detail = "all estimators within 4 standard errors";
  else res.detail = detail.str();
  return res;
}

SuiteResult gradient_equivalence_suite(const VerifyOptions& opts) {
  SuiteResult res;
  res.name = "gradient_equivalence";
  res.passed = true;
  std::ostringstream detail;
  const Estimator est = Estimator::CompW1;

  for (int c = 0; c < 2; ++c) {
    auto ti = make_instance(opts.seed + 200 + c, 8, 8, 5, 2);
    Rng rng(opts.seed + 300 + c);

    objectives::Group group;
    group.x = ti.x;
    std::vector<double> rewards;
    Rng data = rng.split(0);
    for (int i = 0; i < 4; ++i) {
      objectives::GroupSample s;
      for (std::size_t j = 0; j < 5; ++j)
        s.y.push_back(static_cast<TokenId>(1 + data.next_below(7)));
      s.reward = data.next_double();
      group.samples.push_back(std::move(s));
      rewards.push_back(group.samples.back().reward);
    }
    const auto adv = objectives::grpo_advantages(rewards);

    // On-policy GRPO: clipped surrogate vs weighted policy gradient.
    const auto pi_old = policy::snapshot(ti.params);
    GradientBuffer ga = GradientBuffer::zeros(ti.params.cfg);
    GradientBuffer gb = GradientBuffer::zeros(ti.params.cfg);
    std::vector<objectives::BatchItem> items;
    for (std::size_t i = 0; i < group.samples.size(); ++i)
      items.push_back({group.samples[i].y, group.x, adv[i],
                       objectives::SampleSource::Sampled});
    Rng ra = rng.split(1), rb = rng.split(1);
    objectives::unified_loss(items, ti.params, ti.vocab, est, ra, &ga);
    objectives::grpo_clipped_surrogate(group, ti.params, pi_old, 0.2, adv,
                                       ti.vocab, est, rb, &gb);
    const double grpo_diff = max_rel_diff(ga, gb, 1e-9);

    // Online DPO: weighted form vs the log-sigmoid chain rule.
    const double beta = 0.3;
    Rng rw = rng.split(2), rw2 = rng.split(2);
    const auto weights = objectives::dpo_weights(group, ti.params, &pi_old,
                                                 beta, ti.vocab, est, rw);
    GradientBuffer gc = GradientBuffer::zeros(ti.params.cfg);
    GradientBuffer gd = GradientBuffer::zeros(ti.params.cfg);
    for (std::size_t i = 0; i < items.size(); ++i) items[i].advantage = weights[i];
    Rng rl = rng.split(3), rl2 = rng.split(3);
    objectives::unified_loss(items, ti.params, ti.vocab, est, rl, &gc);
    {
      const double n = static_cast<double>(group.samples.size());
      for (const auto& [wi, li] :
           objectives::pair_by_reward(group.rewards())) {
        // Recover z from the shared streams, then apply d log(sigmoid)/dz.
        Rng sw = rw2.split(wi), sl = rw2.split(li);
        Rng sw_ref = sw, sl_ref = sl;
        const double lw = likelihood::estimate_loglik(est, ti.params, ti.vocab,
                                                      group.samples[wi].y,
                                                      group.x, sw)
                              .value;
        const double ll = likelihood::estimate_loglik(est, ti.params, ti.vocab,
                                                      group.samples[li].y,
                                                      group.x, sl)
                              .value;
        const double lw_ref =
            likelihood::estimate_loglik(est, pi_old, ti.vocab,
                                        group.samples[wi].y, group.x, sw_ref)
                .value;
        const double ll_ref =
            likelihood::estimate_loglik(est, pi_old, ti.vocab,
                                        group.samples[li].y, group.x, sl_ref)
                .value;
        const double z = beta * ((lw - ll) - (lw_ref - ll_ref));
        const double sig = 1.0 / (1.0 + std::exp(z));  // sigmoid(-z)
        Rng gw = rl2.split(wi), gl = rl2.split(li);
        likelihood::estimate_loglik(est, ti.params, ti.vocab,
                                    group.samples[wi].y, group.x, gw,
                                    -beta * sig / n, &gd);
        likelihood::estimate_loglik(est, ti.params, ti.vocab,
                                    group.samples[li].y, group.x, gl,
                                    beta * sig / n, &gd);
      }
    }
    const double dpo_diff = max_rel_diff(gc, gd, 1e-9);

    const double worst = std::max(grpo_diff, dpo_diff);
    if (worst > 1e-6) {
      res.passed = false;
      detail << "case " << c << ": grpo " << grpo_diff << ", dpo " << dpo_diff
             << "; ";
    }
  }
  res.detail = res.passed ? "grpo/dpo gradients match within 1e-6"
                          : detail.str();
  return res;
}

SuiteResult trajectory_replay_suite(const VerifyOptions& opts) {
  SuiteResult res;
  res.name = "trajectory_replay";
  res.passed = true;

  auto ti = make_instance(opts.seed + 400, 8, 8);
  const DiffusionSchedule schedule{16};
  const auto predictor = rollout::make_predictor(ti.params);

  for (int run = 0; run < 10 && res.passed; ++run) {
    Rng rng = Rng(opts.seed + 500).split(run);
    Sequence init(8, ti.vocab.mask_id);
    std::vector<Sequence> history;
    const auto traj = diffusion::generate(predictor, ti.vocab, ti.x, init,
                                          schedule, rng, &history);
    for (std::size_t h = 0; h < history.size(); ++h) {
      const auto rebuilt =
          rollout::reconstruct(traj, ti.vocab, static_cast<int>(h) + 1);
      if (rebuilt != history[h]) {
        res.passed = false;
        res.detail = "mismatch at step " + std::to_string(h + 1);
        break;
      }
    }
  }
  if (res.passed) res.detail = "reconstruct matches stored states bit-exactly";
  return res;
}

SuiteResult iou_brute_force_suite(const VerifyOptions&) {
  SuiteResult res;
  res.name = "iou_brute_force";
  res.passed = true;

  for (int a = 0; a <= 15 && res.passed; ++a)
    for (int b = a; b <= 15 && res.passed; ++b)
      for (int c = 0; c <= 15 && res.passed; ++c)
        for (int d = c; d <= 15 && res.passed; ++d) {
          int inter = 0;
          for (int g = 0; g <= 15; ++g)
            inter += (g >= a && g <= b && g >= c && g <= d) ? 1 : 0;
          int uni = 0;
          for (int g = 0; g <= 15; ++g)
            uni += ((g >= a && g <= b) || (g >= c && g <= d)) ? 1 : 0;
          const double brute =
              static_cast<double>(inter) / static_cast<double>(uni);
          if (rewards::interval_iou(a, b, c, d) != brute) {
            res.passed = false;
            res.detail = "mismatch at [" + std::to_string(a) + "," +
                         std::to_string(b) + "] vs [" + std::to_string(c) +
                         "," + std::to_string(d) + "]";
          }
        }
  if (res.passed) res.detail = "all pairs in [0,15]^4 match the grid count";
  return res;
}

SuiteResult loopback_suite(const VerifyOptions& opts) {
  SuiteResult res;
  res.name = "reward_loopback";
  res.passed = true;

  const auto vocab = Vocabulary::standard();
  reward_net::RewardServer server(vocab, 0);
  reward_net::RewardClient client("127.0.0.1", server.port(), 2000);

  Rng rng(opts.seed + 600);
  const auto modsum = make_task("modsum");
  const auto interval = make_task("interval");
  for (int i = 0; i < 20 && res.passed; ++i) {
    const auto& task = i % 2 == 0 ? modsum : interval;
    Rng inst_rng = rng.split(i);
    const auto inst = task_generate(task, vocab, inst_rng);
    Sequence response = i % 3 == 0
                            ? Sequence(12, vocab.pad_id)  // malformed
                            : sft_response(task, vocab, inst, inst_rng);
    const double local = key_reward(task, vocab, inst, response);
    const double remote = client.evaluate(task.name, inst.x, response);
    if (local != remote) {
      res.passed = false;
      res.detail = "loopback mismatch on case " + std::to_string(i);
    }
  }

  // Failure contract: a dead endpoint must error out, never zero-fill.
  bool failed_properly = false;
  try {
    reward_net::RewardClient dead("127.0.0.1", 9, 200);
    dead.evaluate("modsum", {}, {});
  } catch (const reward_net::RewardServiceError&) {
    failed_properly = true;
  }
  if (!failed_properly) {
    res.passed = false;
    res.detail += "; dead endpoint did not raise";
  }
  if (res.passed) res.detail = "local == remote on 20 cases; dead endpoint raises";
  return res;
}

template <typename Fn>
SuiteResult timed(Fn&& fn, const VerifyOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult res = fn(opts);
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return res;
}

}  // namespace

std::vector<SuiteResult> verify(const VerifyOptions& opts) {
  std::vector<SuiteResult> results;
  results.push_back(timed(finite_difference_suite, opts));
  results.push_back(timed(estimator_suite, opts));
  results.push_back(timed(gradient_equivalence_suite, opts));
  results.push_back(timed(trajectory_replay_suite, opts));
  results.push_back(timed(iou_brute_force_suite, opts));
  results.push_back(timed(loopback_suite, opts));
  return results;
}

std::string verify_report_json(const std::vector<SuiteResult>& results) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    j.push_back({{"suite", r.name},
                 {"passed", r.passed},
                 {"seconds", r.seconds},
                 {"detail", r.detail}});
  }
  return j.dump(2);
}

bool all_passed(const std::vector<SuiteResult>& results) {
  for (const auto& r : results)
    if (!r.passed) return false;
  return true;
}

}  // namespace maskrl::harness
