#pragma once

#include "maskrl/vocab.hpp"

#include <optional>
#include <string>
#include <utility>

namespace maskrl::rewards {

enum class KeyRewardKind { Correctness, Iou, Remote };

KeyRewardKind key_reward_from_string(const std::string& name);

// Key reward plus additive auxiliary shaping. Gates (answer forcing, tree
// search) consume the key reward only.
struct RewardSpec {
  KeyRewardKind kind = KeyRewardKind::Correctness;
  double format_weight = 0.1;
  double repetition_weight = 1.0;
};

struct RewardParts {
  std::optional<double> key;
  std::optional<double> format;
  std::optional<double> repetition;
};

struct RewardResult {
  double key = 0.0;
  double format = 0.0;
  double repetition = 0.0;
  double combined = 0.0;
};

// 1 iff the response parses as well-formed and the answer span equals the
// target tokens exactly.
double correctness_reward(const Vocabulary& vocab, const Sequence& response,
                          const Sequence& z_star);

// Inclusive-integer interval IoU: |[a,b] n [c,d]| / |[a,b] u [c,d]| with
// segment size hi - lo + 1. An inverted [a, b] scores 0.
double interval_iou(int a, int b, int c, int d);

// IoU of the two coordinates in the answer span against gt = [c, d].
// Malformed responses, non-coordinate answers, or an inverted predicted
// interval score 0.
double iou_reward(const Vocabulary& vocab, const Sequence& response,
                  std::pair<int, int> gt_interval);

// 1 iff the token rendering matches one anchored pattern: think-open,
// span, think-close, optional filler run, answer-open, non-empty span,
// answer-close, then only pad or filler. Stricter than counting tags.
double format_reward(const Vocabulary& vocab, const Sequence& response);

// -(max run of a repeated non-pad token - 3)+ / length; 0 at or below the
// threshold.
double repetition_penalty(const Vocabulary& vocab, const Sequence& response);

// combined = key + format_weight * format + repetition_weight * repetition.
// Missing parts are an error.
RewardResult combine(const RewardSpec& spec, const RewardParts& parts);

}  // namespace maskrl::rewards
