#pragma once

#include <string>
#include <vector>

#include "livechat/data/clip.hpp"
#include "livechat/data/synth.hpp"
#include "livechat/data/vocabulary.hpp"
#include "livechat/model/config.hpp"
#include "livechat/train/trainer.hpp"

namespace livechat::testing {

// d_model=8, one layer, one head.
inline model::ModelConfig micro_config() {
  model::ModelConfig c;
  c.d_model = 8;
  c.d_frame = 4;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.n_heads = 1;
  c.d_ff = 16;
  c.dropout = 0.0;
  c.audio_tokens = 6;
  c.comment_tokens = 4;
  c.response_tokens = 5;
  c.context_comments = 2;
  c.context_s = 3;
  c.clip_s = 5;
  return c;
}

inline data::Vocabulary micro_vocab() {
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  for (const char* w : {"a", "b", "c", "d", "e", "f", "g", "h"}) ranked.emplace_back(w, 1);
  return data::Vocabulary::from_ranked(ranked);
}

inline data::ClipExample micro_clip() {
  data::ClipExample clip;
  clip.clip_id = "micro#0";
  clip.category = "test";
  clip.t = 0.0;
  for (int r = 0; r < 3; ++r) {
    std::vector<double> frame;
    for (int c = 0; c < 4; ++c) frame.push_back(0.25 * (r + 1) - 0.4 * c + 0.1 * r * c);
    clip.frames.push_back(frame);
  }
  clip.audio_tokens = {"a", "b", "c"};
  clip.context_comments = {data::make_comment(0.5, "d e"), data::make_comment(1.5, "f")};
  clip.response_comments = {data::make_comment(3.5, "g h a")};
  return clip;
}

// Hidden size 64, two layers: the desk-scale learnability setting.
inline model::ModelConfig desk_config(std::size_t d_frame = 64) {
  model::ModelConfig c;
  c.d_model = 64;
  c.d_frame = d_frame;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.n_heads = 4;
  c.d_ff = 128;
  c.dropout = 0.1;
  c.audio_tokens = 24;
  c.comment_tokens = 8;
  c.response_tokens = 8;
  c.context_comments = 5;
  c.context_s = 20;
  c.clip_s = 30;
  return c;
}

inline train::TrainConfig desk_train_config(std::uint64_t seed) {
  train::TrainConfig t;
  t.lr = 1e-3;
  t.batch_size = 32;
  t.epochs_pretrain = 10;
  t.epochs_train = 20;
  t.p_mask = 0.15;
  t.seed = seed;
  return t;
}

inline data::SynthParams synth_params(std::size_t n_streams, std::size_t clips_per_stream,
                                      std::size_t eval_streams, std::size_t n_topics, std::uint64_t seed) {
  data::SynthParams p;
  p.n_streams = n_streams;
  p.clips_per_stream = clips_per_stream;
  p.eval_streams = eval_streams;
  p.n_topics = n_topics;
  p.d_frame = 64;
  p.seed = seed;
  return p;
}

}  // namespace livechat::testing
