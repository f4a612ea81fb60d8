#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace livechat::data {

// Lowercases ASCII letters, splits on whitespace (ASCII and the Unicode space
// separators) and strips leading/trailing ASCII punctuation from each piece.
// A piece made only of punctuation (":)", "???") is kept as written, so
// emoticons survive. Emote names such as "PogChamp" are ordinary words.
std::vector<std::string> tokenize(std::string_view text);

// Space-joins tokens; tokenize(join_tokens(tokenize(s))) == tokenize(s).
std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace livechat::data
