#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "livechat/common/rng.hpp"

namespace livechat::eval {

using Tokens = std::vector<std::string>;

enum class Strategy { kCosine, kPopularity, kRandom };

std::string strategy_name(Strategy strategy);
Strategy parse_strategy(const std::string& name);  // throws std::invalid_argument

// One positive response and its distractors. Candidates are identified by
// their normalized text (tokens joined by single spaces).
struct CandidateSet {
  std::string query_id;
  Tokens positive;
  std::vector<Tokens> distractors;
  Strategy strategy = Strategy::kRandom;

  std::size_t size() const { return 1 + distractors.size(); }
};

std::string text_key(const Tokens& tokens);

// Bag-of-words TF-IDF with idf(w) = ln((1 + N) / (1 + df(w))) + 1 over the
// fitting documents; words never seen get the idf of df = 0.
class TfIdf {
 public:
  static TfIdf fit(const std::vector<Tokens>& documents);

  // L2-normalized sparse vector; empty for an empty document.
  std::map<std::string, double> vectorize(const Tokens& tokens) const;

  double idf(const std::string& word) const;

  static double cosine(const std::map<std::string, double>& a, const std::map<std::string, double>& b);

 private:
  std::unordered_map<std::string, double> idf_;
  double unseen_idf_ = 1.0;
};

// Distinct texts of a pool, in first-seen order.
std::vector<Tokens> distinct_texts(const std::vector<Tokens>& pool);

// The n_distractors pool texts most cosine-similar to the concatenated context
// comments; ties in key order. Copies of the positive never qualify.
CandidateSet candidates_cosine(const std::vector<Tokens>& context_comments, const std::vector<Tokens>& pool,
                               const Tokens& positive, const TfIdf& tfidf, std::size_t n_distractors = 9);

// The n_distractors most frequent texts of the stream's comments; ties in key
// order. The positive's text is excluded.
CandidateSet candidates_popularity(const std::vector<Tokens>& stream_pool, const Tokens& positive,
                                   std::size_t n_distractors = 9);

// n_distractors distinct texts drawn uniformly without replacement.
CandidateSet candidates_random(const std::vector<Tokens>& pool, const Tokens& positive, Rng& rng,
                               std::size_t n_distractors = 9);

}  // namespace livechat::eval
