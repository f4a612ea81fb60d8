#include "livechat/eval/harness.hpp"

#include <map>
#include <stdexcept>

#include "livechat/common/errors.hpp"
#include "livechat/common/rng.hpp"

namespace livechat::eval {
namespace {

void collect_comments(const data::ClipExample& clip, std::vector<Tokens>& out) {
  for (const auto& c : clip.context_comments) {
    if (!c.tokens.empty()) out.push_back(c.tokens);
  }
  for (const auto& c : clip.response_comments) {
    if (!c.tokens.empty()) out.push_back(c.tokens);
  }
}

// Earliest response with at least one token, or null.
const data::CommentRecord* positive_of(const data::ClipExample& clip) {
  const data::CommentRecord* best = nullptr;
  for (const auto& c : clip.response_comments) {
    if (c.tokens.empty()) continue;
    if (best == nullptr || c.t < best->t) best = &c;
  }
  return best;
}

}  // namespace

template <typename T>
std::size_t rank_candidates(const model::ModelParams<T>& params, const model::EncodedContext<T>& ctx,
                            const CandidateSet& candidates, const data::Vocabulary& vocab) {
  const double positive = model::score_candidate<T>(vocab.encode(candidates.positive), ctx, params);
  std::vector<double> scores;
  scores.reserve(candidates.distractors.size());
  for (const auto& d : candidates.distractors) scores.push_back(model::score_candidate<T>(vocab.encode(d), ctx, params));
  return rank_of_positive(positive, scores);
}

template <typename T>
EvalResult evaluate(const model::ModelParams<T>& params, const data::Vocabulary& vocab,
                    const std::vector<data::ClipExample>& pool_clips,
                    const std::vector<data::ClipExample>& query_clips, const EvalOptions& options) {
  if (query_clips.empty()) throw std::invalid_argument("evaluate: no query clips");
  if (options.n_candidates < 2) throw ConfigError("evaluate: need at least 2 candidates");
  const std::size_t n_distractors = options.n_candidates - 1;

  std::vector<Tokens> fit_docs;
  for (const auto& clip : pool_clips) collect_comments(clip, fit_docs);
  std::vector<Tokens> pool = fit_docs;
  std::map<std::string, std::vector<Tokens>> stream_pools;
  for (const auto& clip : query_clips) {
    collect_comments(clip, pool);
    collect_comments(clip, stream_pools[clip.stream_id()]);
  }
  pool = distinct_texts(pool);
  const TfIdf tfidf = options.strategy == Strategy::kCosine ? TfIdf::fit(fit_docs) : TfIdf{};

  EvalResult result;
  std::vector<std::size_t> ranks;
  for (std::size_t q = 0; q < query_clips.size(); ++q) {
    const auto& clip = query_clips[q];
    const data::CommentRecord* positive = positive_of(clip);
    if (positive == nullptr) continue;
    CandidateSet set;
    switch (options.strategy) {
      case Strategy::kCosine: {
        std::vector<Tokens> context;
        for (const auto& slot : data::select_context_comments(clip, options.n_context)) {
          if (slot.comment) context.push_back(slot.comment->tokens);
        }
        set = candidates_cosine(context, pool, positive->tokens, tfidf, n_distractors);
        break;
      }
      case Strategy::kPopularity:
        set = candidates_popularity(stream_pools.at(clip.stream_id()), positive->tokens, n_distractors);
        break;
      case Strategy::kRandom: {
        Rng rng(mix_seed(options.seed, q));
        set = candidates_random(pool, positive->tokens, rng, n_distractors);
        break;
      }
    }
    set.query_id = clip.clip_id;
    const auto inputs = model::make_clip_inputs<T>(clip, vocab, params.config, options.n_context);
    const auto ctx = model::encode_context(inputs, params, model::ForwardMode::eval());
    const std::size_t rank = rank_candidates(params, ctx, set, vocab);
    ranks.push_back(rank);
    result.queries.push_back({clip.clip_id, text_key(positive->tokens), rank});
  }
  if (ranks.empty()) throw std::invalid_argument("evaluate: no query clip has a non-empty response");
  result.report = retrieval_metrics(ranks, options.n_candidates);
  result.report.strategy = strategy_name(options.strategy);
  result.report.augmentation = options.augmentation;
  return result;
}

nlohmann::json eval_result_to_json(const EvalResult& result) {
  nlohmann::json queries = nlohmann::json::array();
  for (const auto& q : result.queries) {
    queries.push_back({{"clip_id", q.clip_id}, {"positive", q.positive}, {"rank", q.rank}});
  }
  nlohmann::json j = report_to_json(result.report);
  j["queries"] = queries;
  return j;
}

template std::size_t rank_candidates(const model::ModelParams<float>&, const model::EncodedContext<float>&,
                                     const CandidateSet&, const data::Vocabulary&);
template std::size_t rank_candidates(const model::ModelParams<double>&, const model::EncodedContext<double>&,
                                     const CandidateSet&, const data::Vocabulary&);
template EvalResult evaluate(const model::ModelParams<float>&, const data::Vocabulary&,
                             const std::vector<data::ClipExample>&, const std::vector<data::ClipExample>&,
                             const EvalOptions&);
template EvalResult evaluate(const model::ModelParams<double>&, const data::Vocabulary&,
                             const std::vector<data::ClipExample>&, const std::vector<data::ClipExample>&,
                             const EvalOptions&);

}  // namespace livechat::eval
