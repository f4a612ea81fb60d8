#include "livechat/eval/metrics.hpp"

#include <stdexcept>
#include <string>

namespace livechat::eval {

RetrievalReport retrieval_metrics(std::span<const std::size_t> ranks, std::size_t n_candidates) {
  if (ranks.empty()) throw std::invalid_argument("retrieval_metrics: no ranks");
  std::size_t hits1 = 0, hits2 = 0, hits5 = 0, rank_sum = 0;
  double reciprocal_sum = 0.0;
  for (std::size_t r : ranks) {
    if (r < 1 || r > n_candidates) {
      throw std::out_of_range("retrieval_metrics: rank " + std::to_string(r) + " outside [1, " +
                              std::to_string(n_candidates) + "]");
    }
    hits1 += r <= 1;
    hits2 += r <= 2;
    hits5 += r <= 5;
    rank_sum += r;
    reciprocal_sum += 1.0 / static_cast<double>(r);
  }
  const double n = static_cast<double>(ranks.size());
  RetrievalReport report;
  report.n_queries = ranks.size();
  report.recall_at_1 = 100.0 * static_cast<double>(hits1) / n;
  report.recall_at_2 = 100.0 * static_cast<double>(hits2) / n;
  report.recall_at_5 = 100.0 * static_cast<double>(hits5) / n;
  report.mean_rank = static_cast<double>(rank_sum) / n;
  report.mrr = reciprocal_sum / n;
  return report;
}

std::size_t rank_of_positive(double positive_score, std::span<const double> distractor_scores) {
  std::size_t rank = 1;
  for (double s : distractor_scores) rank += s >= positive_score;
  return rank;
}

nlohmann::json report_to_json(const RetrievalReport& r) {
  return {{"n_queries", r.n_queries},   {"recall_at_1", r.recall_at_1}, {"recall_at_2", r.recall_at_2},
          {"recall_at_5", r.recall_at_5}, {"mean_rank", r.mean_rank},     {"mrr", r.mrr},
          {"strategy", r.strategy},     {"augmentation", r.augmentation}};
}

}  // namespace livechat::eval
