#include "livechat/data/clip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "livechat/common/errors.hpp"
#include "livechat/data/tokenizer.hpp"

namespace livechat::data {

CommentRecord make_comment(double t, std::string raw_text) {
  CommentRecord c;
  c.t = t;
  c.tokens = tokenize(raw_text);
  c.raw_text = std::move(raw_text);
  return c;
}

void ClipTiming::validate() const {
  if (context_s == 0 || clip_s == 0) throw ConfigError("clip timing: T1 and T2 must be positive");
  if (context_s >= clip_s) {
    throw ConfigError("clip timing: context window T1=" + std::to_string(context_s) +
                      " must be shorter than clip length T2=" + std::to_string(clip_s));
  }
  if (d_frame == 0) throw ConfigError("clip timing: d_frame must be positive");
}

std::string ClipExample::stream_id() const {
  const auto hash = clip_id.rfind('#');
  return hash == std::string::npos ? clip_id : clip_id.substr(0, hash);
}

DensestWindow densest_window(std::span<const double> timestamps, double window_len) {
  if (timestamps.empty()) throw std::invalid_argument("densest_window: no timestamps");
  if (!(window_len > 0.0)) throw std::invalid_argument("densest_window: window length must be positive");
  if (!std::is_sorted(timestamps.begin(), timestamps.end())) {
    throw std::invalid_argument("densest_window: timestamps must be sorted");
  }
  DensestWindow best{timestamps.front(), 0};
  std::size_t end = 0;
  for (std::size_t begin = 0; begin < timestamps.size(); ++begin) {
    if (begin > 0 && timestamps[begin] == timestamps[begin - 1]) continue;
    const double limit = timestamps[begin] + window_len;
    if (end < begin) end = begin;
    while (end < timestamps.size() && timestamps[end] < limit) ++end;
    const std::size_t count = end - begin;
    if (count > best.count) best = {timestamps[begin], count};
  }
  return best;
}

RawStream crop_stream(const RawStream& stream, double start, double window_len) {
  RawStream out;
  out.stream_id = stream.stream_id;
  out.category = stream.category;
  const double end = std::min(start + window_len, stream.duration_s);
  out.duration_s = std::max(0.0, end - start);
  const auto first_frame = static_cast<std::size_t>(std::max(0.0, std::floor(start)));
  for (std::size_t j = 0; static_cast<double>(j) < out.duration_s; ++j) {
    if (first_frame + j >= stream.frames.size()) break;
    out.frames.push_back(stream.frames[first_frame + j]);
  }
  for (const auto& seg : stream.transcript) {
    if (seg.t >= start && seg.t < end) out.transcript.push_back({seg.t - start, seg.text});
  }
  for (const auto& c : stream.comments) {
    if (c.t >= start && c.t < end) {
      CommentRecord shifted = c;
      shifted.t = c.t - start;
      out.comments.push_back(std::move(shifted));
    }
  }
  return out;
}

std::vector<ClipExample> slice_clips(const RawStream& stream, const ClipTiming& timing) {
  timing.validate();
  const double t1 = static_cast<double>(timing.context_s);
  const double t2 = static_cast<double>(timing.clip_s);
  if (stream.duration_s < t2) {
    throw std::invalid_argument("slice_clips: stream " + stream.stream_id + " lasts " +
                                std::to_string(stream.duration_s) + " s, shorter than one clip");
  }
  const auto n_clips = static_cast<std::size_t>(std::floor(stream.duration_s / t2));
  std::vector<ClipExample> clips(n_clips);
  for (std::size_t k = 0; k < n_clips; ++k) {
    ClipExample& clip = clips[k];
    clip.clip_id = stream.stream_id + "#" + std::to_string(k);
    clip.category = stream.category;
    clip.t = static_cast<double>(k) * t2;
    const std::size_t first = k * timing.clip_s;
    clip.frames.reserve(timing.context_s);
    for (std::size_t j = 0; j < timing.context_s; ++j) {
      const std::size_t f = first + j;
      if (f < stream.frames.size()) {
        if (stream.frames[f].size() != timing.d_frame) {
          throw ShapeError("slice_clips: frame " + std::to_string(f) + " of " + stream.stream_id +
                           " has " + std::to_string(stream.frames[f].size()) + " features, expected " +
                           std::to_string(timing.d_frame));
        }
        clip.frames.push_back(stream.frames[f]);
      } else {
        clip.frames.emplace_back(timing.d_frame, 0.0);
      }
    }
  }
  const auto clip_of = [&](double t) -> std::optional<std::size_t> {
    if (t < 0.0) return std::nullopt;
    const auto k = static_cast<std::size_t>(std::floor(t / t2));
    if (k >= n_clips) return std::nullopt;
    return k;
  };
  for (const auto& seg : stream.transcript) {
    const auto k = clip_of(seg.t);
    if (!k || seg.t - clips[*k].t >= t1) continue;
    for (auto& tok : tokenize(seg.text)) clips[*k].audio_tokens.push_back(std::move(tok));
  }
  std::vector<CommentRecord> ordered = stream.comments;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const CommentRecord& a, const CommentRecord& b) { return a.t < b.t; });
  for (auto& c : ordered) {
    const auto k = clip_of(c.t);
    if (!k) continue;
    if (c.t - clips[*k].t < t1) {
      clips[*k].context_comments.push_back(std::move(c));
    } else {
      clips[*k].response_comments.push_back(std::move(c));
    }
  }
  std::erase_if(clips, [](const ClipExample& c) { return c.response_comments.empty(); });
  return clips;
}

std::vector<ContextSlot> select_context_comments(const ClipExample& clip, std::size_t n_context) {
  if (n_context == 0) throw std::invalid_argument("select_context_comments: n_c must be >= 1");
  std::vector<CommentRecord> ordered = clip.context_comments;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const CommentRecord& a, const CommentRecord& b) { return a.t < b.t; });
  const std::size_t take = std::min(n_context, ordered.size());
  std::vector<ContextSlot> slots(n_context - take, ContextSlot{std::nullopt, true});
  for (std::size_t i = ordered.size() - take; i < ordered.size(); ++i) {
    slots.push_back(ContextSlot{std::move(ordered[i]), false});
  }
  return slots;
}

}  // namespace livechat::data
