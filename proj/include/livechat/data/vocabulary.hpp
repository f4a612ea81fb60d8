#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "livechat/tensor/ops.hpp"

namespace livechat::data {

using tensor::TokenId;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr TokenId kMask = 4;
inline constexpr std::size_t kReservedCount = 5;

// Bidirectional token <-> id map. Ids 0..4 are the reserved PAD, UNK, BOS, EOS
// and MASK symbols; corpus tokens start at id 5 in frequency rank order.
class Vocabulary {
 public:
  Vocabulary();

  // Ranked (token, count) pairs, reserved tokens excluded.
  static Vocabulary from_ranked(std::vector<std::pair<std::string, std::uint64_t>> ranked);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::uint64_t count(TokenId id) const { return counts_.at(static_cast<std::size_t>(id)); }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  // FNV-1a over the token list; identifies the id assignment.
  std::uint64_t hash() const;

  // "token<TAB>count" per line, rank order, reserved tokens omitted.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

// Keeps tokens with count >= min_freq, most frequent first (ties in byte
// order), at most max_size - 5 of them.
Vocabulary build_vocabulary(std::span<const std::vector<std::string>> token_sequences,
                            std::uint64_t min_freq, std::size_t max_size);

}  // namespace livechat::data
