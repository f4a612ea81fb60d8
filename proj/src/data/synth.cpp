#include "livechat/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "livechat/common/errors.hpp"
#include "livechat/common/rng.hpp"

namespace livechat::data {
namespace {

double round_to(double value, double step) { return std::round(value / step) * step; }

std::string draw_text(Rng& rng, const SynthParams& p, std::size_t topic, std::size_t min_words,
                      std::size_t max_words) {
  const std::size_t n = rng.range(min_words, max_words);
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) text.push_back(' ');
    if (rng.bernoulli(p.shared_word_prob)) {
      text += shared_word(rng.below(p.vocab_per_topic));
    } else {
      text += topic_word(topic, rng.below(p.vocab_per_topic));
    }
  }
  return text;
}

// Sorted timestamps in [lo, hi) at 10 ms resolution.
std::vector<double> draw_times(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> times(n);
  for (auto& t : times) {
    t = round_to(lo + rng.uniform() * (hi - lo), 0.01);
    if (t >= hi) t = hi - 0.01;
  }
  std::sort(times.begin(), times.end());
  return times;
}

RawStream make_stream(Rng& rng, const SynthParams& p, const std::vector<std::vector<double>>& topic_dirs,
                      const std::string& id, std::vector<std::size_t>& topics_out) {
  RawStream s;
  s.stream_id = id;
  s.category = "synthetic";
  const double t1 = static_cast<double>(p.context_s);
  const double t2 = static_cast<double>(p.clip_s);
  s.duration_s = t2 * static_cast<double>(p.clips_per_stream);
  for (std::size_t k = 0; k < p.clips_per_stream; ++k) {
    const std::size_t z = rng.below(p.n_topics);
    topics_out.push_back(z);
    const double start = t2 * static_cast<double>(k);
    for (std::size_t f = 0; f < p.clip_s; ++f) {
      std::vector<double> frame(p.d_frame);
      for (std::size_t j = 0; j < p.d_frame; ++j)
        frame[j] = round_to(topic_dirs[z][j] + p.noise_sigma * rng.normal(), 1e-4);
      s.frames.push_back(std::move(frame));
    }
    for (double t = start; t < start + t2; t += 4.0) {
      s.transcript.push_back({t, draw_text(rng, p, z, 2, 4)});
    }
    for (double t : draw_times(rng, rng.range(2, 8), start, start + t1))
      s.comments.push_back(make_comment(t, draw_text(rng, p, z, 1, 5)));
    for (double t : draw_times(rng, rng.range(1, 3), start + t1, start + t2))
      s.comments.push_back(make_comment(t, draw_text(rng, p, z, 1, 4)));
  }
  return s;
}

}  // namespace

void SynthParams::validate() const {
  if (n_streams < 1 || clips_per_stream < 1 || n_topics < 1 || vocab_per_topic < 1 || d_frame < 1) {
    throw ConfigError("synth: stream, clip, topic, vocabulary and frame counts must be >= 1");
  }
  if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be non-negative");
  ClipTiming{context_s, clip_s, d_frame}.validate();
}

std::string topic_word(std::size_t topic, std::size_t index) {
  return "z" + std::to_string(topic) + "w" + std::to_string(index);
}

std::string shared_word(std::size_t index) { return "x" + std::to_string(index); }

SyntheticCorpus synthesize_corpus(const SynthParams& params) {
  params.validate();
  Rng rng(params.seed);
  std::vector<std::vector<double>> topic_dirs(params.n_topics, std::vector<double>(params.d_frame));
  for (auto& dir : topic_dirs)
    for (auto& v : dir) v = rng.normal();

  SyntheticCorpus out;
  out.corpus.manifest = {params.d_frame, params.context_s, params.clip_s, 0, 0};
  const ClipTiming timing{params.context_s, params.clip_s, params.d_frame};
  for (std::size_t s = 0; s < params.n_streams + params.eval_streams; ++s) {
    const bool is_eval = s >= params.n_streams;
    auto& topics = is_eval ? out.eval_topics : out.train_topics;
    RawStream stream = make_stream(rng, params, topic_dirs, "s" + std::to_string(s), topics);
    auto clips = slice_clips(stream, timing);
    auto& split = is_eval ? out.corpus.eval : out.corpus.train;
    for (auto& c : clips) {
      c.category = "topic" + std::to_string(topics[split.size()]);
      split.push_back(std::move(c));
    }
    out.streams.push_back(std::move(stream));
  }
  out.corpus.manifest.n_train = out.corpus.train.size();
  out.corpus.manifest.n_eval = out.corpus.eval.size();
  return out;
}

}  // namespace livechat::data
