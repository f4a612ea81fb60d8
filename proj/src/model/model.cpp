#include "livechat/model/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "livechat/common/errors.hpp"
#include "livechat/tensor/tape.hpp"

namespace livechat::model {
namespace {

using namespace livechat::tensor;

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, const ModelParams<T>& params, const ForwardMode& mode) {
  if (!mode.training || params.config.dropout == 0.0) return x;
  if (mode.rng == nullptr) throw std::invalid_argument("training forward pass needs an rng");
  return dropout(x, params.config.dropout, *mode.rng);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const LayerNormParams<T>& p) {
  return tensor::layer_norm(x, p.gamma, p.beta);
}

template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const FeedForwardParams<T>& p) {
  return linear(gelu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(want) + " entries, got " +
                     std::to_string(got));
  }
}

bool allowed_output(TokenId id) {
  return id != data::kPad && id != data::kBos && id != data::kMask;
}

}  // namespace

std::vector<TokenId> frame_tokens(std::span<const TokenId> words, std::size_t length,
                                  std::vector<std::uint8_t>* valid) {
  if (length < 2) throw ConfigError("frame_tokens: length must leave room for [BOS] and [EOS]");
  const std::size_t n = std::min(words.size(), length - 2);
  std::vector<TokenId> ids(length, data::kPad);
  ids[0] = data::kBos;
  std::copy(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(n), ids.begin() + 1);
  ids[n + 1] = data::kEos;
  if (valid != nullptr) {
    valid->assign(length, 0);
    std::fill(valid->begin(), valid->begin() + static_cast<std::ptrdiff_t>(n + 2), 1);
  }
  return ids;
}

template <typename T>
ClipInputs<T> make_clip_inputs(const data::ClipExample& clip, const data::Vocabulary& vocab,
                               const ModelConfig& config, std::size_t n_context) {
  if (n_context == 0) throw ConfigError("make_clip_inputs: n_c must be >= 1");
  ClipInputs<T> in;
  const std::size_t t1 = config.context_s, df = config.d_frame;
  if (clip.frames.size() > t1) {
    throw ShapeError("clip " + clip.clip_id + " has " + std::to_string(clip.frames.size()) +
                     " frames, more than T1=" + std::to_string(t1));
  }
  std::vector<T> frames(t1 * df, T(0));
  in.frame_valid.assign(t1, 0);
  for (std::size_t r = 0; r < clip.frames.size(); ++r) {
    if (clip.frames[r].size() != df) {
      throw ShapeError("clip " + clip.clip_id + ": frame of dimension " +
                       std::to_string(clip.frames[r].size()) + ", expected d_frame=" + std::to_string(df));
    }
    for (std::size_t c = 0; c < df; ++c) frames[r * df + c] = static_cast<T>(clip.frames[r][c]);
    in.frame_valid[r] = 1;
  }
  // Rows absent from the clip are masked; a clip always carries at least one.
  if (clip.frames.empty()) in.frame_valid[0] = 1;
  in.frames = Tensor<T>({t1, df}, std::move(frames));

  in.audio_ids = frame_tokens(vocab.encode(clip.audio_tokens), config.audio_tokens, &in.audio_valid);

  const auto slots = data::select_context_comments(clip, n_context);
  const std::size_t pc = config.comment_tokens;
  in.comment_ids.reserve(n_context * pc);
  in.comment_valid.reserve(n_context * pc);
  bool any_real = false;
  for (const auto& slot : slots) {
    std::vector<TokenId> words;
    if (slot.comment) words = vocab.encode(slot.comment->tokens);
    std::vector<std::uint8_t> valid;
    const auto ids = frame_tokens(words, pc, &valid);
    in.comment_ids.insert(in.comment_ids.end(), ids.begin(), ids.end());
    in.comment_valid.insert(in.comment_valid.end(), valid.begin(), valid.end());
    in.slot_valid.push_back(slot.masked ? 0 : 1);
    any_real = any_real || !slot.masked;
  }
  if (!any_real) in.slot_valid.back() = 1;
  return in;
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& queries, const Tensor<T>& keys_values,
                               const AttentionMask& mask, const AttentionParams<T>& p,
                               std::size_t n_heads) {
  const Tensor<T> q = linear(queries, p.wq, p.bq);
  const Tensor<T> k = linear(keys_values, p.wk, p.bk);
  const Tensor<T> v = linear(keys_values, p.wv, p.bv);
  return linear(attention(q, k, v, mask, n_heads), p.wo, p.bo);
}

template <typename T>
Tensor<T> encoder_stack(Tensor<T> x, const AttentionMask& mask, const EncoderParams<T>& params,
                        const ModelConfig& config, const ForwardMode& mode) {
  const double rate = config.dropout;
  auto drop = [&](const Tensor<T>& t) {
    if (!mode.training || rate == 0.0) return t;
    if (mode.rng == nullptr) throw std::invalid_argument("training forward pass needs an rng");
    return dropout(t, rate, *mode.rng);
  };
  for (const auto& layer : params.layers) {
    const Tensor<T> h = layer_norm(x, layer.ln_attn);
    x = add(x, drop(multi_head_attention(h, h, mask, layer.attn, config.n_heads)));
    x = add(x, drop(feed_forward(layer_norm(x, layer.ln_ffn), layer.ffn)));
  }
  return layer_norm(x, params.final_ln);
}

template <typename T>
EncodedSequence<T> encode_video(const Tensor<T>& frames, const ModelParams<T>& params,
                                const ForwardMode& mode, std::span<const std::uint8_t> frame_valid) {
  const ModelConfig& c = params.config;
  if (frames.rank() != 2 || frames.dim(1) != c.d_frame) {
    throw ShapeError("encode_video: frames " + shape_string(frames.shape()) + ", expected [n x " +
                     std::to_string(c.d_frame) + "]");
  }
  const std::size_t n = frames.dim(0);
  if (n > c.context_s) {
    throw ShapeError("encode_video: " + std::to_string(n) + " frames exceed T1=" + std::to_string(c.context_s));
  }
  if (!frame_valid.empty()) require_length(frame_valid.size(), n, "encode_video frame mask");
  Tensor<T> input = frames;
  if (n < c.context_s) {
    std::vector<T> padded(c.context_s * c.d_frame, T(0));
    std::copy(frames.data().begin(), frames.data().end(), padded.begin());
    input = Tensor<T>({c.context_s, c.d_frame}, std::move(padded));
  }
  EncodedSequence<T> out;
  out.valid.assign(c.context_s, 0);
  for (std::size_t r = 0; r < n; ++r) out.valid[r] = frame_valid.empty() ? 1 : frame_valid[r];
  Tensor<T> x = add_positional(linear(input, params.frame_proj_w, params.frame_proj_b), params.pos_frames);
  x = maybe_dropout(x, params, mode);
  AttentionMask mask{out.valid, false, 0};
  out.states = encoder_stack(x, mask, params.video_encoder, c, mode);
  return out;
}

template <typename T>
Tensor<T> audio_states(std::span<const TokenId> ids, std::span<const std::uint8_t> valid,
                       const ModelParams<T>& params, const ForwardMode& mode) {
  const ModelConfig& c = params.config;
  require_length(ids.size(), c.audio_tokens, "encode_audio ids");
  require_length(valid.size(), c.audio_tokens, "encode_audio mask");
  Tensor<T> x = add_positional(embedding_lookup(ids, params.token_embedding), params.pos_audio);
  x = maybe_dropout(x, params, mode);
  AttentionMask mask{std::vector<std::uint8_t>(valid.begin(), valid.end()), false, 0};
  return encoder_stack(x, mask, params.audio_encoder, c, mode);
}

template <typename T>
EncodedSequence<T> encode_audio(std::span<const TokenId> ids, std::span<const std::uint8_t> valid,
                                const ModelParams<T>& params, const ForwardMode& mode) {
  return {audio_states(ids, valid, params, mode), std::vector<std::uint8_t>(valid.begin(), valid.end())};
}

template <typename T>
Tensor<T> comment_states(std::span<const TokenId> ids, std::span<const std::uint8_t> token_valid,
                         const ModelParams<T>& params, const ForwardMode& mode) {
  const ModelConfig& c = params.config;
  const std::size_t pc = c.comment_tokens;
  if (ids.empty() || ids.size() % pc != 0) {
    throw ShapeError("encode_comments: " + std::to_string(ids.size()) + " ids is not a multiple of p_c=" +
                     std::to_string(pc));
  }
  require_length(token_valid.size(), ids.size(), "encode_comments mask");
  Tensor<T> x = add_positional(embedding_lookup(ids, params.token_embedding), params.pos_comment, pc);
  x = maybe_dropout(x, params, mode);
  AttentionMask mask{std::vector<std::uint8_t>(token_valid.begin(), token_valid.end()), false, pc};
  return encoder_stack(x, mask, params.comment_encoder, c, mode);
}

template <typename T>
EncodedSequence<T> encode_comments(std::span<const TokenId> ids,
                                   std::span<const std::uint8_t> token_valid,
                                   std::span<const std::uint8_t> slot_valid,
                                   const ModelParams<T>& params, const ForwardMode& mode) {
  const std::size_t pc = params.config.comment_tokens;
  const Tensor<T> states = comment_states(ids, token_valid, params, mode);
  const std::size_t slots = ids.size() / pc;
  require_length(slot_valid.size(), slots, "encode_comments slot mask");
  std::vector<std::size_t> first(slots);
  for (std::size_t s = 0; s < slots; ++s) first[s] = s * pc;
  return {gather_rows(states, std::span<const std::size_t>(first)),
          std::vector<std::uint8_t>(slot_valid.begin(), slot_valid.end())};
}

template <typename T>
EncodedContext<T> encode_context(const ClipInputs<T>& in, const ModelParams<T>& params,
                                 const ForwardMode& mode) {
  EncodedContext<T> ctx;
  ctx.video = encode_video(in.frames, params, mode, in.frame_valid);
  ctx.audio = encode_audio<T>(in.audio_ids, in.audio_valid, params, mode);
  ctx.comments = encode_comments<T>(in.comment_ids, in.comment_valid, in.slot_valid, params, mode);
  return ctx;
}

template <typename T>
Tensor<T> decoder_forward(std::span<const TokenId> input_ids, const EncodedContext<T>& ctx,
                          const ModelParams<T>& params, const ForwardMode& mode) {
  const ModelConfig& c = params.config;
  if (input_ids.empty()) throw std::invalid_argument("decoder_forward: empty input");
  if (input_ids.size() > c.response_tokens) {
    throw ShapeError("decoder_forward: " + std::to_string(input_ids.size()) + " tokens exceed p_r=" +
                     std::to_string(c.response_tokens));
  }
  Tensor<T> x = add_positional(embedding_lookup(input_ids, params.token_embedding), params.pos_response);
  x = maybe_dropout(x, params, mode);
  const AttentionMask self_mask{{}, true, 0};
  const AttentionMask video_mask{ctx.video.valid, false, 0};
  const AttentionMask audio_mask{ctx.audio.valid, false, 0};
  const AttentionMask comment_mask{ctx.comments.valid, false, 0};
  for (const auto& layer : params.decoder_layers) {
    Tensor<T> h = layer_norm(x, layer.ln_self);
    x = add(x, maybe_dropout(multi_head_attention(h, h, self_mask, layer.self_attn, c.n_heads), params, mode));
    h = layer_norm(x, layer.ln_video);
    x = add(x, maybe_dropout(multi_head_attention(h, ctx.video.states, video_mask, layer.video_attn, c.n_heads),
                             params, mode));
    h = layer_norm(x, layer.ln_audio);
    x = add(x, maybe_dropout(multi_head_attention(h, ctx.audio.states, audio_mask, layer.audio_attn, c.n_heads),
                             params, mode));
    h = layer_norm(x, layer.ln_comment);
    x = add(x, maybe_dropout(
                   multi_head_attention(h, ctx.comments.states, comment_mask, layer.comment_attn, c.n_heads),
                   params, mode));
    x = add(x, maybe_dropout(feed_forward(layer_norm(x, layer.ln_ffn), layer.ffn), params, mode));
  }
  return linear(layer_norm(x, params.decoder_final_ln), params.output_w, params.output_b);
}

template <typename T>
Tensor<T> mlm_logits(const Tensor<T>& states, const ModelParams<T>& params) {
  return linear_transposed(states, params.token_embedding, params.mlm_bias);
}

DecoderPair decoder_pair(std::span<const TokenId> words, std::size_t response_tokens) {
  if (response_tokens < 2) throw ConfigError("decoder_pair: p_r must be >= 2");
  const std::size_t n = std::min(words.size(), response_tokens - 1);
  DecoderPair pair;
  pair.input.push_back(data::kBos);
  pair.input.insert(pair.input.end(), words.begin(), words.begin() + static_cast<std::ptrdiff_t>(n));
  pair.labels.assign(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(n));
  pair.labels.push_back(data::kEos);
  return pair;
}

template <typename T>
double score_candidate(std::span<const TokenId> candidate, const EncodedContext<T>& ctx,
                       const ModelParams<T>& params) {
  if (candidate.empty()) throw std::invalid_argument("score_candidate: empty candidate");
  NoTapeScope<T> no_tape;
  const DecoderPair pair = decoder_pair(candidate, params.config.response_tokens);
  const Tensor<T> logits = decoder_forward<T>(pair.input, ctx, params, ForwardMode::eval());
  const std::vector<T> logp = log_softmax_rows(logits);
  const std::size_t vocab = logits.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < pair.labels.size(); ++i) {
    total += static_cast<double>(logp[i * vocab + static_cast<std::size_t>(pair.labels[i])]);
  }
  return total / static_cast<double>(pair.labels.size());
}

namespace {

struct Hypothesis {
  std::vector<TokenId> tokens;  // starts with [BOS]
  double logp = 0.0;
  bool finished = false;

  double normalized() const {
    return logp / static_cast<double>(tokens.size() - 1 + (finished ? 1 : 0));
  }
};

// Higher normalized score first; equal scores fall back to token order so the
// lowest ids win.
bool better(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.normalized(), sb = b.normalized();
  if (sa != sb) return sa > sb;
  if (a.tokens != b.tokens) return a.tokens < b.tokens;
  return a.finished && !b.finished;
}

template <typename T>
std::vector<T> next_log_probs(const std::vector<TokenId>& prefix, const EncodedContext<T>& ctx,
                              const ModelParams<T>& params) {
  const Tensor<T> logits = decoder_forward<T>(prefix, ctx, params, ForwardMode::eval());
  const std::size_t vocab = logits.cols(), last = logits.dim(0) - 1;
  const Tensor<T> row({1, vocab}, std::vector<T>(logits.data().begin() + static_cast<std::ptrdiff_t>(last * vocab),
                                                 logits.data().end()));
  return log_softmax_rows(row);
}

}  // namespace

template <typename T>
std::vector<TokenId> generate_comment(const EncodedContext<T>& ctx, const ModelParams<T>& params,
                                      const GenerateOptions& options) {
  const std::size_t p_r = params.config.response_tokens;
  const std::size_t max_len = options.max_len == 0 ? p_r : options.max_len;
  if (max_len > p_r) {
    throw ConfigError("generate_comment: max_len=" + std::to_string(max_len) + " exceeds p_r=" + std::to_string(p_r));
  }
  const std::size_t width = options.strategy == DecodeStrategy::kGreedy ? 1 : options.beam_width;
  if (width < 1) throw std::invalid_argument("generate_comment: beam_width must be >= 1");
  NoTapeScope<T> no_tape;

  std::vector<Hypothesis> beams{Hypothesis{{data::kBos}, 0.0, false}};
  for (std::size_t step = 0; step < max_len; ++step) {
    std::vector<Hypothesis> pool;
    bool expanded = false;
    for (const auto& hyp : beams) {
      if (hyp.finished) {
        pool.push_back(hyp);
        continue;
      }
      expanded = true;
      const std::vector<T> logp = next_log_probs(hyp.tokens, ctx, params);
      for (std::size_t id = 0; id < logp.size(); ++id) {
        const auto token = static_cast<TokenId>(id);
        if (!allowed_output(token)) continue;
        Hypothesis next = hyp;
        next.logp += static_cast<double>(logp[id]);
        if (token == data::kEos) {
          next.finished = true;
        } else {
          next.tokens.push_back(token);
        }
        pool.push_back(std::move(next));
      }
    }
    if (!expanded) break;
    const std::size_t keep = std::min(width, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), better);
    pool.resize(keep);
    beams = std::move(pool);
  }
  const Hypothesis& best = *std::min_element(beams.begin(), beams.end(), better);
  return {best.tokens.begin() + 1, best.tokens.end()};
}

#define LIVECHAT_INSTANTIATE_MODEL(T)                                                                  \
  template ClipInputs<T> make_clip_inputs<T>(const data::ClipExample&, const data::Vocabulary&,       \
                                             const ModelConfig&, std::size_t);                        \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const Tensor<T>&, const AttentionMask&,   \
                                          const AttentionParams<T>&, std::size_t);                    \
  template Tensor<T> encoder_stack(Tensor<T>, const AttentionMask&, const EncoderParams<T>&,          \
                                   const ModelConfig&, const ForwardMode&);                           \
  template EncodedSequence<T> encode_video(const Tensor<T>&, const ModelParams<T>&, const ForwardMode&, \
                                           std::span<const std::uint8_t>);                            \
  template EncodedSequence<T> encode_audio(std::span<const TokenId>, std::span<const std::uint8_t>,   \
                                           const ModelParams<T>&, const ForwardMode&);                \
  template Tensor<T> audio_states(std::span<const TokenId>, std::span<const std::uint8_t>,            \
                                  const ModelParams<T>&, const ForwardMode&);                         \
  template EncodedSequence<T> encode_comments(std::span<const TokenId>, std::span<const std::uint8_t>, \
                                              std::span<const std::uint8_t>, const ModelParams<T>&,   \
                                              const ForwardMode&);                                    \
  template Tensor<T> comment_states(std::span<const TokenId>, std::span<const std::uint8_t>,          \
                                    const ModelParams<T>&, const ForwardMode&);                       \
  template EncodedContext<T> encode_context(const ClipInputs<T>&, const ModelParams<T>&,              \
                                            const ForwardMode&);                                      \
  template Tensor<T> decoder_forward(std::span<const TokenId>, const EncodedContext<T>&,              \
                                     const ModelParams<T>&, const ForwardMode&);                      \
  template Tensor<T> mlm_logits(const Tensor<T>&, const ModelParams<T>&);                             \
  template double score_candidate(std::span<const TokenId>, const EncodedContext<T>&,                 \
                                  const ModelParams<T>&);                                             \
  template std::vector<TokenId> generate_comment(const EncodedContext<T>&, const ModelParams<T>&,     \
                                                 const GenerateOptions&);

LIVECHAT_INSTANTIATE_MODEL(float)
LIVECHAT_INSTANTIATE_MODEL(double)

}  // namespace livechat::model
