#pragma once

#include <cstddef>
#include <map>
#include <span>

#include "json.hpp"
#include "livechat/data/clip.hpp"

namespace livechat::data {

// Corpus-level figures. A video is a stream (clip id prefix); its duration is
// the span from its first clip start to its last clip end. Comments are the
// context and response chat of every clip.
struct CorpusStats {
  std::size_t n_videos = 0;
  std::size_t n_comments = 0;
  double duration_s = 0.0;
  double avg_duration_s = 0.0;
  double avg_comments_per_video = 0.0;
  double avg_words_per_comment = 0.0;
  double comment_density_cps = 0.0;
  std::size_t vocab_size_unique_words = 0;
  std::map<std::size_t, std::size_t> words_per_comment_histogram;
};

CorpusStats corpus_stats(std::span<const ClipExample> clips, std::size_t clip_s);

nlohmann::json stats_to_json(const CorpusStats& stats);

}  // namespace livechat::data
