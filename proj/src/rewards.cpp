#include "maskrl/rewards.hpp"

#include "maskrl/rollout.hpp"

#include <algorithm>
#include <regex>
#include <stdexcept>

namespace maskrl::rewards {

KeyRewardKind key_reward_from_string(const std::string& name) {
  if (name == "correctness") return KeyRewardKind::Correctness;
  if (name == "iou") return KeyRewardKind::Iou;
  if (name == "remote") return KeyRewardKind::Remote;
  throw std::invalid_argument("unknown reward kind: " + name);
}

double correctness_reward(const Vocabulary& vocab, const Sequence& response,
                          const Sequence& z_star) {
  const auto parsed = rollout::parse_response(vocab, response);
  return parsed.well_formed && parsed.answer == z_star ? 1.0 : 0.0;
}

double interval_iou(int a, int b, int c, int d) {
  if (a > b) return 0.0;
  const int inter = std::max(0, std::min(b, d) - std::max(a, c) + 1);
  const int uni = (b - a + 1) + (d - c + 1) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou_reward(const Vocabulary& vocab, const Sequence& response,
                  std::pair<int, int> gt_interval) {
  const auto [c, d] = gt_interval;
  if (c > d) throw std::invalid_argument("iou_reward: inverted gt interval");
  const auto parsed = rollout::parse_response(vocab, response);
  if (!parsed.well_formed || parsed.answer.size() != 2) return 0.0;
  if (!vocab.is_coord(parsed.answer[0]) || !vocab.is_coord(parsed.answer[1]))
    return 0.0;
  return interval_iou(vocab.coord_value(parsed.answer[0]),
                      vocab.coord_value(parsed.answer[1]), c, d);
}

double format_reward(const Vocabulary& vocab, const Sequence& response) {
  // One character per token: tags T/t/A/a, pad P, filler S, mask M,
  // everything else x. A single anchored regex decides the format.
  std::string rendered;
  rendered.reserve(response.size());
  for (TokenId tok : response) {
    char c = 'x';
    if (tok == vocab.think_open_id) c = 'T';
    else if (tok == vocab.think_close_id) c = 't';
    else if (tok == vocab.answer_open_id) c = 'A';
    else if (tok == vocab.answer_close_id) c = 'a';
    else if (tok == vocab.pad_id) c = 'P';
    else if (tok == vocab.fim_id) c = 'S';
    else if (tok == vocab.mask_id) c = 'M';
    rendered += c;
  }
  static const std::regex pattern("^T[xS]*tS*A[xS]+a[PS]*$");
  return std::regex_match(rendered, pattern) ? 1.0 : 0.0;
}

double repetition_penalty(const Vocabulary& vocab, const Sequence& response) {
  constexpr int kThreshold = 3;
  if (response.empty()) return 0.0;
  int max_run = 0, run = 0;
  TokenId prev = vocab.pad_id;
  for (TokenId tok : response) {
    if (tok != vocab.pad_id && tok == prev) {
      ++run;
    } else {
      run = tok == vocab.pad_id ? 0 : 1;
    }
    prev = tok;
    max_run = std::max(max_run, run);
  }
  const int over = std::max(0, max_run - kThreshold);
  return -static_cast<double>(over) / static_cast<double>(response.size());
}

RewardResult combine(const RewardSpec& spec, const RewardParts& parts) {
  if (!parts.key.has_value())
    throw std::invalid_argument("combine: missing key reward");
  if (!parts.format.has_value())
    throw std::invalid_argument("combine: missing format reward");
  if (!parts.repetition.has_value())
    throw std::invalid_argument("combine: missing repetition penalty");
  RewardResult r;
  r.key = *parts.key;
  r.format = *parts.format;
  r.repetition = *parts.repetition;
  r.combined = r.key + spec.format_weight * r.format +
               spec.repetition_weight * r.repetition;
  return r;
}

}  // namespace maskrl::rewards
