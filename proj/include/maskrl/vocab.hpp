#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace maskrl {

using TokenId = std::uint32_t;
using Sequence = std::vector<TokenId>;

// Sorted set of masked positions within a sequence.
using MaskPattern = std::vector<std::size_t>;

// Token table with the distinguished tokens the diffusion process and the
// response grammar rely on. mask_id marks a not-yet-generated position and
// never appears in clean sequences; fim_id is the variable-length filler
// token generated when a reasoning trace is shorter than its masked span.
struct Vocabulary {
  std::vector<std::string> names;
  std::unordered_map<std::string, TokenId> ids;

  TokenId mask_id = 0;
  TokenId pad_id = 0;
  TokenId fim_id = 0;
  TokenId think_open_id = 0;
  TokenId think_close_id = 0;
  TokenId answer_open_id = 0;
  TokenId answer_close_id = 0;
  TokenId plus_id = 0;
  TokenId digit0_id = 0;  // digits occupy [digit0_id, digit0_id + 10)
  TokenId coord0_id = 0;  // coordinates occupy [coord0_id, coord0_id + 16)

  std::size_t size() const { return names.size(); }

  TokenId digit(int d) const;
  TokenId coord(int c) const;
  bool is_digit(TokenId t) const;
  bool is_coord(TokenId t) const;
  int digit_value(TokenId t) const;
  int coord_value(TokenId t) const;

  bool is_tag(TokenId t) const {
    return t == think_open_id || t == think_close_id || t == answer_open_id ||
           t == answer_close_id;
  }

  const std::string& name(TokenId t) const;
  TokenId id(const std::string& name) const;

  std::string detokenize(const Sequence& seq) const;

  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);

  // The fixed vocabulary used by the synthetic tasks: special tokens,
  // digits 0-9, "+", coordinates c0-c15.
  static Vocabulary standard();

  // Minimal vocabulary of the given size (>= 8): mask plus tag/pad/filler
  // tokens plus generic content tokens g0, g1, ... Digits and coordinates
  // are absent. Meant for estimator and gradient tests that pin |V|.
  static Vocabulary generic(std::size_t size);
};

// Positions of mask tokens in y.
MaskPattern masked_positions(const Vocabulary& vocab, const Sequence& y);

// Uniform timestep grid t_i = 1 - i/T, i = 0..T, strictly decreasing from
// t_0 = 1 to t_T = 0.
struct DiffusionSchedule {
  int steps = 64;

  double t_of(int i) const { return 1.0 - static_cast<double>(i) / steps; }
};

}  // namespace maskrl
