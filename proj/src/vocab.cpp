#include "maskrl/vocab.hpp"

#include <json.hpp>

#include <stdexcept>

namespace maskrl {

TokenId Vocabulary::digit(int d) const {
  if (d < 0 || d > 9) throw std::out_of_range("digit out of range");
  return digit0_id + static_cast<TokenId>(d);
}

TokenId Vocabulary::coord(int c) const {
  if (c < 0 || c > 15) throw std::out_of_range("coordinate out of range");
  return coord0_id + static_cast<TokenId>(c);
}

bool Vocabulary::is_digit(TokenId t) const {
  return t >= digit0_id && t < digit0_id + 10;
}

bool Vocabulary::is_coord(TokenId t) const {
  return t >= coord0_id && t < coord0_id + 16;
}

int Vocabulary::digit_value(TokenId t) const {
  if (!is_digit(t)) throw std::invalid_argument("not a digit token");
  return static_cast<int>(t - digit0_id);
}

int Vocabulary::coord_value(TokenId t) const {
  if (!is_coord(t)) throw std::invalid_argument("not a coordinate token");
  return static_cast<int>(t - coord0_id);
}

const std::string& Vocabulary::name(TokenId t) const {
  if (t >= names.size()) throw std::out_of_range("token id out of range");
  return names[t];
}

TokenId Vocabulary::id(const std::string& name) const {
  auto it = ids.find(name);
  if (it == ids.end()) throw std::out_of_range("unknown token: " + name);
  return it->second;
}

std::string Vocabulary::detokenize(const Sequence& seq) const {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += name(seq[i]);
  }
  return out;
}

std::string Vocabulary::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (TokenId t = 0; t < names.size(); ++t) j[names[t]] = t;
  return j.dump(2);
}

Vocabulary Vocabulary::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<std::string> names(j.size());
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto id = it.value().get<TokenId>();
    if (id >= names.size()) throw std::invalid_argument("vocab ids not dense");
    names[id] = it.key();
  }

  Vocabulary v;
  v.names = std::move(names);
  for (TokenId t = 0; t < v.names.size(); ++t) {
    if (v.names[t].empty()) throw std::invalid_argument("vocab ids not dense");
    v.ids[v.names[t]] = t;
  }
  v.mask_id = v.id("<mask>");
  v.pad_id = v.id("<pad>");
  v.fim_id = v.id("<s>");
  v.think_open_id = v.id("<think>");
  v.think_close_id = v.id("</think>");
  v.answer_open_id = v.id("<answer>");
  v.answer_close_id = v.id("</answer>");
  v.plus_id = v.id("+");
  v.digit0_id = v.id("0");
  v.coord0_id = v.id("c0");
  return v;
}

Vocabulary Vocabulary::standard() {
  Vocabulary v;
  auto add = [&v](const std::string& name) {
    const auto t = static_cast<TokenId>(v.names.size());
    v.names.push_back(name);
    v.ids[name] = t;
    return t;
  };

  v.mask_id = add("<mask>");
  v.pad_id = add("<pad>");
  v.fim_id = add("<s>");
  v.think_open_id = add("<think>");
  v.think_close_id = add("</think>");
  v.answer_open_id = add("<answer>");
  v.answer_close_id = add("</answer>");
  v.plus_id = add("+");
  v.digit0_id = add("0");
  for (int d = 1; d <= 9; ++d) add(std::to_string(d));
  v.coord0_id = add("c0");
  for (int c = 1; c <= 15; ++c) add("c" + std::to_string(c));
  return v;
}

Vocabulary Vocabulary::generic(std::size_t size) {
  if (size < 8) throw std::invalid_argument("generic vocabulary needs >= 8");
  Vocabulary v;
  auto add = [&v](const std::string& name) {
    const auto t = static_cast<TokenId>(v.names.size());
    v.names.push_back(name);
    v.ids[name] = t;
    return t;
  };
  v.mask_id = add("<mask>");
  v.pad_id = add("<pad>");
  v.fim_id = add("<s>");
  v.think_open_id = add("<think>");
  v.think_close_id = add("</think>");
  v.answer_open_id = add("<answer>");
  v.answer_close_id = add("</answer>");
  for (std::size_t i = 7; i < size; ++i)
    add("g" + std::to_string(i - 7));
  // No digit/coord/plus tokens; point past the end so the predicates are
  // always false and the accessors throw.
  v.plus_id = static_cast<TokenId>(size);
  v.digit0_id = static_cast<TokenId>(size);
  v.coord0_id = static_cast<TokenId>(size);
  return v;
}

MaskPattern masked_positions(const Vocabulary& vocab, const Sequence& y) {
  MaskPattern out;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == vocab.mask_id) out.push_back(i);
  return out;
}

}  // namespace maskrl
