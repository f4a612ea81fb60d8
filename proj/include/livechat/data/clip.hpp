#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace livechat::data {

// One chat message, username-free.
struct CommentRecord {
  double t = 0.0;  // seconds from stream start
  std::string raw_text;
  std::vector<std::string> tokens;  // tokenize(raw_text)
};

CommentRecord make_comment(double t, std::string raw_text);

struct TranscriptSegment {
  double t = 0.0;
  std::string text;
};

// A whole stream before slicing: 1 fps frame features, transcript segments and
// chat, all on the stream clock.
struct RawStream {
  std::string stream_id;
  std::string category;
  double duration_s = 0.0;
  std::vector<std::vector<double>> frames;
  std::vector<TranscriptSegment> transcript;
  std::vector<CommentRecord> comments;
};

struct ClipTiming {
  std::size_t context_s = 20;  // T1
  std::size_t clip_s = 30;     // T2
  std::size_t d_frame = 2048;

  // Throws ConfigError unless 0 < T1 < T2 and d_frame > 0.
  void validate() const;
};

// One training/evaluation example: context window [t, t+T1) and response
// window [t+T1, t+T2).
struct ClipExample {
  std::string clip_id;  // "<stream id>#<clip index>"
  std::string category;
  double t = 0.0;
  std::vector<std::vector<double>> frames;  // T1 rows of d_frame
  std::vector<std::string> audio_tokens;
  std::vector<CommentRecord> context_comments;
  std::vector<CommentRecord> response_comments;

  std::string stream_id() const;
};

struct DensestWindow {
  double start = 0.0;
  std::size_t count = 0;
};

// Window [start, start + window_len) holding the most timestamps, over the
// candidate starts t_i. Earliest start wins ties. Timestamps must be sorted.
DensestWindow densest_window(std::span<const double> timestamps, double window_len);

// Cuts [start, start + window_len) out of a stream and shifts it to start at 0.
RawStream crop_stream(const RawStream& stream, double start, double window_len);

// Non-overlapping clips at t = 0, T2, 2*T2, ...; clips whose response window
// is empty are dropped.
std::vector<ClipExample> slice_clips(const RawStream& stream, const ClipTiming& timing);

// An n_c-slot view of the context chat: the most recent comments, oldest
// first; missing slots lead and are masked.
struct ContextSlot {
  std::optional<CommentRecord> comment;  // empty for a padding sentinel
  bool masked = false;
};

std::vector<ContextSlot> select_context_comments(const ClipExample& clip, std::size_t n_context);

}  // namespace livechat::data
