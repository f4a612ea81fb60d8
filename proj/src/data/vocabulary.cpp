#include "livechat/data/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "livechat/common/errors.hpp"

namespace livechat::data {

Vocabulary::Vocabulary() {
  for (const char* reserved : {"[PAD]", "[UNK]", "[BOS]", "[EOS]", "[MASK]"}) {
    index_.emplace(reserved, static_cast<TokenId>(tokens_.size()));
    tokens_.emplace_back(reserved);
    counts_.push_back(0);
  }
}

Vocabulary Vocabulary::from_ranked(std::vector<std::pair<std::string, std::uint64_t>> ranked) {
  Vocabulary vocab;
  for (auto& [token, count] : ranked) {
    if (token.empty()) throw FormatError("vocabulary: empty token");
    if (!vocab.index_.emplace(token, static_cast<TokenId>(vocab.tokens_.size())).second) {
      throw FormatError("vocabulary: duplicate token '" + token + "'");
    }
    vocab.tokens_.push_back(std::move(token));
    vocab.counts_.push_back(count);
  }
  return vocab;
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("vocabulary: id " + std::to_string(id) + " outside " +
                     std::to_string(tokens_.size()) + " entries");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0x0a;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (std::size_t i = kReservedCount; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << counts_[i] << '\n';
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary " + path.string());
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected token<TAB>count");
    }
    try {
      ranked.emplace_back(line.substr(0, tab), std::stoull(line.substr(tab + 1)));
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad count");
    }
  }
  return from_ranked(std::move(ranked));
}

Vocabulary build_vocabulary(std::span<const std::vector<std::string>> token_sequences,
                            std::uint64_t min_freq, std::size_t max_size) {
  if (min_freq < 1) throw std::invalid_argument("build_vocabulary: min_freq must be >= 1");
  if (max_size <= kReservedCount) {
    throw std::invalid_argument("build_vocabulary: max_size must exceed the 5 reserved ids");
  }
  std::map<std::string, std::uint64_t> counts;
  bool any = false;
  for (const auto& seq : token_sequences) {
    for (const auto& t : seq) {
      ++counts[t];
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("build_vocabulary: empty corpus");
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  for (auto& [token, count] : counts) {
    if (count >= min_freq) ranked.emplace_back(token, count);
  }
  // std::map iteration is already byte-ordered, so a stable sort on count
  // leaves ties lexicographic.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size - kReservedCount) ranked.resize(max_size - kReservedCount);
  return Vocabulary::from_ranked(std::move(ranked));
}

}  // namespace livechat::data
