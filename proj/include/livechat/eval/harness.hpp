#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "livechat/data/clip.hpp"
#include "livechat/data/vocabulary.hpp"
#include "livechat/eval/candidates.hpp"
#include "livechat/eval/metrics.hpp"
#include "livechat/model/model.hpp"

namespace livechat::eval {

// Scores every candidate with the model and returns the positive's rank.
template <typename T>
std::size_t rank_candidates(const model::ModelParams<T>& params, const model::EncodedContext<T>& ctx,
                            const CandidateSet& candidates, const data::Vocabulary& vocab);

struct EvalOptions {
  Strategy strategy = Strategy::kRandom;
  std::uint64_t seed = 0;
  std::size_t n_candidates = 10;
  std::size_t n_context = 15;
  bool augmentation = false;  // tag copied into the report
};

struct QueryResult {
  std::string clip_id;
  std::string positive;
  std::size_t rank = 0;
};

struct EvalResult {
  RetrievalReport report;
  std::vector<QueryResult> queries;
};

// Every query clip contributes its earliest non-empty response as the
// positive. Random and cosine distractors come from all comments of
// pool_clips and query_clips; popularity distractors from the comments of the
// query's own stream among query_clips. TF-IDF is fit on the comments of
// pool_clips.
template <typename T>
EvalResult evaluate(const model::ModelParams<T>& params, const data::Vocabulary& vocab,
                    const std::vector<data::ClipExample>& pool_clips,
                    const std::vector<data::ClipExample>& query_clips, const EvalOptions& options);

nlohmann::json eval_result_to_json(const EvalResult& result);

}  // namespace livechat::eval
