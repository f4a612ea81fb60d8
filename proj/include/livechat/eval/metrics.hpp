#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "json.hpp"

namespace livechat::eval {

struct RetrievalReport {
  std::size_t n_queries = 0;
  double recall_at_1 = 0.0;  // percent of queries
  double recall_at_2 = 0.0;
  double recall_at_5 = 0.0;
  double mean_rank = 0.0;
  double mrr = 0.0;
  std::string strategy;
  bool augmentation = false;
};

// Recall@K = 100 |{r <= K}| / n, MR = mean r, MRR = mean 1/r. Ranks are
// 1-based and must lie in [1, n_candidates].
RetrievalReport retrieval_metrics(std::span<const std::size_t> ranks, std::size_t n_candidates = 10);

// 1 + the number of distractors scoring at least as high as the positive, so
// the positive loses every tie.
std::size_t rank_of_positive(double positive_score, std::span<const double> distractor_scores);

nlohmann::json report_to_json(const RetrievalReport& report);

}  // namespace livechat::eval
