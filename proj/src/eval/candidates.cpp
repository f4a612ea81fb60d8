#include "livechat/eval/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "livechat/data/tokenizer.hpp"

namespace livechat::eval {
namespace {

[[noreturn]] void pool_too_small(const char* who, std::size_t have, std::size_t need) {
  throw std::invalid_argument(std::string(who) + ": pool has " + std::to_string(have) +
                              " distinct texts besides the positive, need " + std::to_string(need));
}

// Distinct non-positive texts keyed by normalized text.
std::vector<std::pair<std::string, Tokens>> others(const std::vector<Tokens>& pool, const std::string& positive) {
  std::vector<std::pair<std::string, Tokens>> out;
  std::unordered_set<std::string> seen{positive};
  for (const auto& text : pool) {
    std::string key = text_key(text);
    if (seen.insert(key).second) out.emplace_back(std::move(key), text);
  }
  return out;
}

}  // namespace

std::string strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kCosine:
      return "cosine";
    case Strategy::kPopularity:
      return "popularity";
    case Strategy::kRandom:
      return "random";
  }
  return "random";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "cosine") return Strategy::kCosine;
  if (name == "popularity") return Strategy::kPopularity;
  if (name == "random") return Strategy::kRandom;
  throw std::invalid_argument("unknown candidate strategy '" + name + "' (cosine|popularity|random)");
}

std::string text_key(const Tokens& tokens) { return data::join_tokens(tokens); }

TfIdf TfIdf::fit(const std::vector<Tokens>& documents) {
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    for (const auto& word : std::set<std::string>(doc.begin(), doc.end())) ++df[word];
  }
  TfIdf model;
  const double n = static_cast<double>(documents.size());
  for (const auto& [word, count] : df) {
    model.idf_[word] = std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0;
  }
  model.unseen_idf_ = std::log(1.0 + n) + 1.0;
  return model;
}

double TfIdf::idf(const std::string& word) const {
  const auto it = idf_.find(word);
  return it == idf_.end() ? unseen_idf_ : it->second;
}

std::map<std::string, double> TfIdf::vectorize(const Tokens& tokens) const {
  std::map<std::string, double> v;
  for (const auto& word : tokens) v[word] += 1.0;
  double norm = 0.0;
  for (auto& [word, weight] : v) {
    weight *= idf(word);
    norm += weight * weight;
  }
  norm = std::sqrt(norm);
  for (auto& entry : v) entry.second /= norm;
  return v;
}

double TfIdf::cosine(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  double dot = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return dot;
}

std::vector<Tokens> distinct_texts(const std::vector<Tokens>& pool) {
  std::vector<Tokens> out;
  std::unordered_set<std::string> seen;
  for (const auto& text : pool) {
    if (seen.insert(text_key(text)).second) out.push_back(text);
  }
  return out;
}

CandidateSet candidates_cosine(const std::vector<Tokens>& context_comments, const std::vector<Tokens>& pool,
                               const Tokens& positive, const TfIdf& tfidf, std::size_t n_distractors) {
  auto texts = others(pool, text_key(positive));
  if (texts.size() < n_distractors) pool_too_small("candidates_cosine", texts.size(), n_distractors);
  Tokens context;
  for (const auto& c : context_comments) context.insert(context.end(), c.begin(), c.end());
  const auto query = tfidf.vectorize(context);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    scored.emplace_back(TfIdf::cosine(query, tfidf.vectorize(texts[i].second)), i);
  }
  auto order = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return texts[a.second].first < texts[b.second].first;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n_distractors), scored.end(), order);
  CandidateSet set{"", positive, {}, Strategy::kCosine};
  for (std::size_t i = 0; i < n_distractors; ++i) set.distractors.push_back(texts[scored[i].second].second);
  return set;
}

CandidateSet candidates_popularity(const std::vector<Tokens>& stream_pool, const Tokens& positive,
                                   std::size_t n_distractors) {
  const std::string positive_key = text_key(positive);
  std::map<std::string, std::pair<std::size_t, Tokens>> counts;
  for (const auto& text : stream_pool) {
    auto key = text_key(text);
    if (key == positive_key) continue;
    auto [it, inserted] = counts.try_emplace(std::move(key), 0, text);
    ++it->second.first;
  }
  if (counts.size() < n_distractors) pool_too_small("candidates_popularity", counts.size(), n_distractors);
  std::vector<const std::pair<const std::string, std::pair<std::size_t, Tokens>>*> ranked;
  for (const auto& entry : counts) ranked.push_back(&entry);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto* a, const auto* b) { return a->second.first > b->second.first; });
  CandidateSet set{"", positive, {}, Strategy::kPopularity};
  for (std::size_t i = 0; i < n_distractors; ++i) set.distractors.push_back(ranked[i]->second.second);
  return set;
}

CandidateSet candidates_random(const std::vector<Tokens>& pool, const Tokens& positive, Rng& rng,
                               std::size_t n_distractors) {
  auto texts = others(pool, text_key(positive));
  if (texts.size() < n_distractors) pool_too_small("candidates_random", texts.size(), n_distractors);
  CandidateSet set{"", positive, {}, Strategy::kRandom};
  for (std::size_t i = 0; i < n_distractors; ++i) {
    const std::size_t j = i + rng.below(texts.size() - i);
    std::swap(texts[i], texts[j]);
    set.distractors.push_back(texts[i].second);
  }
  return set;
}

}  // namespace livechat::eval
