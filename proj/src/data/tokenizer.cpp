#include "livechat/data/tokenizer.hpp"

#include <cstdint>

namespace livechat::data {
namespace {

// Length in bytes of a whitespace sequence starting at text[i], or 0.
std::size_t whitespace_at(std::string_view text, std::size_t i) {
  const auto byte = [&](std::size_t k) { return static_cast<std::uint8_t>(text[k]); };
  const std::uint8_t c = byte(i);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return 1;
  if (c == 0xC2 && i + 1 < text.size() && (byte(i + 1) == 0x85 || byte(i + 1) == 0xA0)) return 2;
  if (i + 2 < text.size()) {
    const std::uint8_t c1 = byte(i + 1), c2 = byte(i + 2);
    // U+1680
    if (c == 0xE1 && c1 == 0x9A && c2 == 0x80) return 3;
    // U+2000..U+200A, U+2028, U+2029, U+202F
    if (c == 0xE2 && c1 == 0x80 &&
        (c2 <= 0x8A || c2 == 0xA8 || c2 == 0xA9 || c2 == 0xAF))
      return 3;
    // U+205F
    if (c == 0xE2 && c1 == 0x81 && c2 == 0x9F) return 3;
    // U+3000
    if (c == 0xE3 && c1 == 0x80 && c2 == 0x80) return 3;
  }
  return 0;
}

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
         (u >= 123 && u <= 126);
}

void emit(std::string piece, std::vector<std::string>& out) {
  if (piece.empty()) return;
  std::size_t begin = 0, end = piece.size();
  while (begin < end && is_ascii_punct(piece[begin])) ++begin;
  while (end > begin && is_ascii_punct(piece[end - 1])) --end;
  if (begin == end) {
    out.push_back(std::move(piece));
    return;
  }
  out.push_back(piece.substr(begin, end - begin));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    if (const std::size_t ws = whitespace_at(text, i)) {
      emit(std::move(current), tokens);
      current.clear();
      i += ws;
      continue;
    }
    char c = text[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    current.push_back(c);
    ++i;
  }
  emit(std::move(current), tokens);
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace livechat::data
