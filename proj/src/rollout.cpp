#include "maskrl/rollout.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace maskrl::rollout {

namespace {

// Split tag for the injection coin; sample streams use small indices.
constexpr std::uint64_t kCoinTag = 0x636f696eULL;

// Runs jobs 0..n-1 across up to `workers` threads. Results are written by
// index, so the outcome is identical for any worker count. The first
// exception thrown by a job is rethrown after all workers join.
void parallel_for(int n, int workers, const std::function<void(int)>& job) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min(workers, n);
  pool.reserve(count);
  for (int w = 0; w < count; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

diffusion::PredictFn make_predictor(const policy::PolicyParams& params) {
  return [&params](const Sequence& y_t, const Sequence& x) {
    return policy::predict(params, y_t, x);
  };
}

Group sample_group(const policy::PolicyParams& params, const Vocabulary& vocab,
                   const Sequence& x, int n,
                   const DiffusionSchedule& schedule, std::size_t max_len,
                   Rng& rng, int workers) {
  if (n < 1) throw std::invalid_argument("sample_group: n < 1");
  const auto predictor = make_predictor(params);
  Group group;
  group.x = x;
  group.samples.resize(n);
  parallel_for(n, workers, [&](int i) {
    Rng stream = rng.split(static_cast<std::uint64_t>(i));
    Sequence init(max_len, vocab.mask_id);
    GroupSample s;
    s.trajectory =
        diffusion::generate(predictor, vocab, x, init, schedule, stream);
    s.y = s.trajectory.y0;
    s.source = SampleSource::Sampled;
    group.samples[i] = std::move(s);
  });
  return group;
}

bool answer_force_gate(double max_unforced_reward, double tau, double coin,
                       double inject_prob) {
  return max_unforced_reward < tau && coin < inject_prob;
}

Group answer_force(const policy::PolicyParams& params, const Vocabulary& vocab,
                   const Sequence& x, const Sequence& z_star, int n,
                   const DiffusionSchedule& schedule, const ForcingConfig& cfg,
                   const RewardFn& reward_fn, std::size_t max_len, Rng& rng,
                   int workers) {
  if (n < 1) throw std::invalid_argument("answer_force: n < 1");
  if (z_star.empty()) throw std::invalid_argument("answer_force: empty z*");
  if (z_star.size() + 2 > max_len)
    throw std::invalid_argument("answer_force: answer and tags exceed length");

  const auto predictor = make_predictor(params);

  // Forced init: M..M <answer> z* </answer>, started at the timestep that
  // matches its mask fraction.
  Sequence forced_init(max_len, vocab.mask_id);
  const std::size_t tail = z_star.size() + 2;
  forced_init[max_len - tail] = vocab.answer_open_id;
  for (std::size_t i = 0; i < z_star.size(); ++i)
    forced_init[max_len - tail + 1 + i] = z_star[i];
  forced_init[max_len - 1] = vocab.answer_close_id;

  std::vector<GroupSample> all(n + 1);
  parallel_for(n + 1, workers, [&](int i) {
    Rng stream = rng.split(static_cast<std::uint64_t>(i));
    Sequence init =
        i < n ? Sequence(max_len, vocab.mask_id) : forced_init;
    GroupSample s;
    s.trajectory =
        diffusion::generate(predictor, vocab, x, init, schedule, stream);
    s.y = s.trajectory.y0;
    s.source = i < n ? SampleSource::Sampled : SampleSource::AnswerForced;
    s.key_reward = reward_fn(s.y);
    all[i] = std::move(s);
  });

  double r_max = all[0].key_reward;
  for (int i = 1; i < n; ++i) r_max = std::max(r_max, all[i].key_reward);
  const double coin = rng.split(kCoinTag).next_double();

  Group group;
  group.x = x;
  group.samples.reserve(n);
  if (answer_force_gate(r_max, cfg.tau, coin, cfg.inject_prob)) {
    // Drop y^1; the samples are i.i.d. so the choice is arbitrary.
    for (int i = 1; i < n + 1; ++i)
      group.samples.push_back(std::move(all[i]));
  } else {
    for (int i = 0; i < n; ++i) group.samples.push_back(std::move(all[i]));
  }
  return group;
}

TreeSearchResult tree_search(const policy::PolicyParams& params,
                             const Vocabulary& vocab, const Sequence& x,
                             const RewardFn& reward_fn,
                             const RestartSchedule& restarts,
                             const DiffusionSchedule& schedule,
                             std::size_t max_len, Rng& rng, int workers) {
  const int n = restarts.base_group;
  const int k = static_cast<int>(restarts.restart_steps.size());
  if (n < 1) throw std::invalid_argument("tree_search: base group < 1");
  if (k < 1) throw std::invalid_argument("tree_search: no restart steps");
  if (restarts.restart_steps[0] != 0)
    throw std::invalid_argument("tree_search: first restart step must be 0");
  for (int s : restarts.restart_steps)
    if (s < 0 || s >= schedule.steps)
      throw std::invalid_argument("tree_search: restart step outside [0, T)");

  const auto predictor = make_predictor(params);

  TreeSearchResult result;
  result.group.x = x;
  auto& samples = result.group.samples;
  samples.reserve(static_cast<std::size_t>(n) * k);

  std::size_t best = 0;
  for (int expansion = 0; expansion < k; ++expansion) {
    const int start = restarts.restart_steps[expansion];
    Sequence init = expansion == 0
                        ? Sequence(max_len, vocab.mask_id)
                        : reconstruct(samples[best].trajectory, vocab, start);

    const std::size_t base = samples.size();
    samples.resize(base + n);
    parallel_for(n, workers, [&](int j) {
      Rng stream = rng.split(static_cast<std::uint64_t>(expansion))
                       .split(static_cast<std::uint64_t>(j));
      GroupSample s;
      s.trajectory = diffusion::generate_from_step(
          predictor, vocab, x, init, schedule, start, stream);
      s.y = s.trajectory.y0;
      s.source = SampleSource::Sampled;
      s.key_reward = reward_fn(s.y);
      samples[base + j] = std::move(s);
    });

    // Branch point for the next expansion: best key reward over everything
    // generated so far, lowest index on ties.
    best = 0;
    for (std::size_t i = 1; i < samples.size(); ++i)
      if (samples[i].key_reward > samples[best].key_reward) best = i;
    result.expansion_max.push_back(samples[best].key_reward);
  }
  return result;
}

Sequence reconstruct(const diffusion::Trajectory& traj,
                     const Vocabulary& vocab, int s) {
  if (s < 0 || s > traj.total_steps)
    throw std::invalid_argument("reconstruct: step outside [0, T]");
  Sequence out(traj.y0.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = traj.unmask_step[i] <= s ? traj.y0[i] : vocab.mask_id;
  return out;
}

ParsedResponse parse_response(const Vocabulary& vocab, const Sequence& y) {
  ParsedResponse parsed;
  std::ptrdiff_t to = -1, tc = -1, ao = -1, ac = -1;
  int counts[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto pos = static_cast<std::ptrdiff_t>(i);
    if (y[i] == vocab.think_open_id) { counts[0]++; to = pos; }
    if (y[i] == vocab.think_close_id) { counts[1]++; tc = pos; }
    if (y[i] == vocab.answer_open_id) { counts[2]++; ao = pos; }
    if (y[i] == vocab.answer_close_id) { counts[3]++; ac = pos; }
  }
  if (counts[0] != 1 || counts[1] != 1 || counts[2] != 1 || counts[3] != 1)
    return parsed;
  if (!(to < tc && tc < ao && ao < ac)) return parsed;
  for (std::size_t i = ac + 1; i < y.size(); ++i)
    if (y[i] != vocab.pad_id && y[i] != vocab.fim_id) return parsed;

  parsed.well_formed = true;
  parsed.think.assign(y.begin() + to + 1, y.begin() + tc);
  parsed.answer.assign(y.begin() + ao + 1, y.begin() + ac);
  return parsed;
}

void dump_group_jsonl(std::ostream& out, const Group& group) {
  for (const auto& s : group.samples) {
    nlohmann::json j;
    j["prompt"] = group.x;
    j["y0"] = s.y;
    j["v"] = s.trajectory.unmask_step;
    j["reward"] = s.reward;
    j["key_reward"] = s.key_reward;
    j["source"] = objectives::source_to_string(s.source);
    out << j.dump() << "\n";
  }
}

}  // namespace maskrl::rollout
