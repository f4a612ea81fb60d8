#include "livechat/data/stats.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace livechat::data {

CorpusStats corpus_stats(std::span<const ClipExample> clips, std::size_t clip_s) {
  if (clips.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
  std::map<std::string, std::pair<double, double>> spans;  // stream -> [first start, last end)
  std::set<std::string> words;
  CorpusStats stats;
  std::size_t total_words = 0;
  for (const auto& clip : clips) {
    const double end = clip.t + static_cast<double>(clip_s);
    auto [it, inserted] = spans.try_emplace(clip.stream_id(), clip.t, end);
    if (!inserted) {
      it->second.first = std::min(it->second.first, clip.t);
      it->second.second = std::max(it->second.second, end);
    }
    for (const auto* group : {&clip.context_comments, &clip.response_comments}) {
      for (const auto& c : *group) {
        ++stats.n_comments;
        total_words += c.tokens.size();
        ++stats.words_per_comment_histogram[c.tokens.size()];
        words.insert(c.tokens.begin(), c.tokens.end());
      }
    }
  }
  stats.n_videos = spans.size();
  for (const auto& [id, span] : spans) stats.duration_s += span.second - span.first;
  stats.avg_duration_s = stats.duration_s / static_cast<double>(stats.n_videos);
  stats.avg_comments_per_video =
      static_cast<double>(stats.n_comments) / static_cast<double>(stats.n_videos);
  stats.avg_words_per_comment =
      stats.n_comments ? static_cast<double>(total_words) / static_cast<double>(stats.n_comments) : 0.0;
  stats.comment_density_cps = static_cast<double>(stats.n_comments) / stats.duration_s;
  stats.vocab_size_unique_words = words.size();
  return stats;
}

nlohmann::json stats_to_json(const CorpusStats& stats) {
  nlohmann::json histogram = nlohmann::json::object();
  for (const auto& [words, count] : stats.words_per_comment_histogram) {
    histogram[std::to_string(words)] = count;
  }
  return {{"n_videos", stats.n_videos},
          {"n_comments", stats.n_comments},
          {"duration_s", stats.duration_s},
          {"avg_duration_s", stats.avg_duration_s},
          {"avg_comments_per_video", stats.avg_comments_per_video},
          {"avg_words_per_comment", stats.avg_words_per_comment},
          {"comment_density_cps", stats.comment_density_cps},
          {"vocab_size_unique_words", stats.vocab_size_unique_words},
          {"words_per_comment_histogram", histogram}};
}

}  // namespace livechat::data
