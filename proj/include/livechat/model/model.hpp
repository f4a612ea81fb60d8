#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "livechat/common/rng.hpp"
#include "livechat/data/clip.hpp"
#include "livechat/data/vocabulary.hpp"
#include "livechat/model/params.hpp"
#include "livechat/tensor/ops.hpp"

namespace livechat::model {

using tensor::AttentionMask;
using tensor::TokenId;

// Dropout is active only in training mode and then draws from rng.
struct ForwardMode {
  bool training = false;
  Rng* rng = nullptr;

  static ForwardMode eval() { return {}; }
  static ForwardMode train(Rng& rng) { return {true, &rng}; }
};

// Encoder output with the key positions later attention may look at.
template <typename T>
struct EncodedSequence {
  Tensor<T> states;                  // [L x d_model]
  std::vector<std::uint8_t> valid;   // one flag per row
};

// V', A' and C'.
template <typename T>
struct EncodedContext {
  EncodedSequence<T> video;     // [T1 x d_model]
  EncodedSequence<T> audio;     // [p_a x d_model]
  EncodedSequence<T> comments;  // [n_c x d_model]
};

// A clip laid out as fixed-size model inputs.
template <typename T>
struct ClipInputs {
  Tensor<T> frames;                        // [T1 x d_frame]
  std::vector<std::uint8_t> frame_valid;   // T1
  std::vector<TokenId> audio_ids;          // p_a: [BOS] w... [EOS] [PAD]...
  std::vector<std::uint8_t> audio_valid;   // p_a
  std::vector<TokenId> comment_ids;        // n_c * p_c, one [BOS] w... [EOS] block per slot
  std::vector<std::uint8_t> comment_valid; // n_c * p_c
  std::vector<std::uint8_t> slot_valid;    // n_c
};

// [BOS] w1 ... [EOS] padded with [PAD] to length; words beyond length - 2 are
// dropped. Fills valid with 1 for the framed tokens and 0 for padding.
std::vector<TokenId> frame_tokens(std::span<const TokenId> words, std::size_t length,
                                  std::vector<std::uint8_t>* valid = nullptr);

// Lays out a clip with n_context comment slots. A clip without any context
// comment keeps its last (empty) slot visible so that cross-attention always
// has a key.
template <typename T>
ClipInputs<T> make_clip_inputs(const data::ClipExample& clip, const data::Vocabulary& vocab,
                               const ModelConfig& config, std::size_t n_context);

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& queries, const Tensor<T>& keys_values,
                               const AttentionMask& mask, const AttentionParams<T>& params,
                               std::size_t n_heads);

// Pre-norm transformer encoder stack with a final layer norm.
template <typename T>
Tensor<T> encoder_stack(Tensor<T> x, const AttentionMask& mask, const EncoderParams<T>& params,
                        const ModelConfig& config, const ForwardMode& mode);

// frames: [n x d_frame] with n <= T1; missing rows are zero-padded and masked.
// frame_valid, when non-empty, marks which of the n rows are real.
template <typename T>
EncodedSequence<T> encode_video(const Tensor<T>& frames, const ModelParams<T>& params,
                                const ForwardMode& mode,
                                std::span<const std::uint8_t> frame_valid = {});

// ids: exactly p_a ids; valid marks the unpadded positions.
template <typename T>
EncodedSequence<T> encode_audio(std::span<const TokenId> ids, std::span<const std::uint8_t> valid,
                                const ModelParams<T>& params, const ForwardMode& mode);

// Hidden states of the audio encoder, [p_a x d_model].
template <typename T>
Tensor<T> audio_states(std::span<const TokenId> ids, std::span<const std::uint8_t> valid,
                       const ModelParams<T>& params, const ForwardMode& mode);

// ids: n_c blocks of p_c ids. Each block is encoded on its own and pooled at
// its first position ([BOS]).
template <typename T>
EncodedSequence<T> encode_comments(std::span<const TokenId> ids,
                                   std::span<const std::uint8_t> token_valid,
                                   std::span<const std::uint8_t> slot_valid,
                                   const ModelParams<T>& params, const ForwardMode& mode);

// Hidden states of every comment token, [n_c * p_c x d_model].
template <typename T>
Tensor<T> comment_states(std::span<const TokenId> ids, std::span<const std::uint8_t> token_valid,
                         const ModelParams<T>& params, const ForwardMode& mode);

template <typename T>
EncodedContext<T> encode_context(const ClipInputs<T>& inputs, const ModelParams<T>& params,
                                 const ForwardMode& mode);

// Logits G [L x vocab] for decoder input ids (starting with [BOS], L <= p_r).
template <typename T>
Tensor<T> decoder_forward(std::span<const TokenId> input_ids, const EncodedContext<T>& ctx,
                          const ModelParams<T>& params, const ForwardMode& mode);

// Tied masked-language-model head over encoder states.
template <typename T>
Tensor<T> mlm_logits(const Tensor<T>& states, const ModelParams<T>& params);

// Teacher-forcing pair for a response: input [BOS] r1..rn, labels r1..rn [EOS],
// with n cut to p_r - 1.
struct DecoderPair {
  std::vector<TokenId> input;
  std::vector<TokenId> labels;
};
DecoderPair decoder_pair(std::span<const TokenId> words, std::size_t response_tokens);

// Mean per-token log-probability of [BOS] c1..cn [EOS] given the context.
template <typename T>
double score_candidate(std::span<const TokenId> candidate, const EncodedContext<T>& ctx,
                       const ModelParams<T>& params);

enum class DecodeStrategy { kGreedy, kBeam };

struct GenerateOptions {
  DecodeStrategy strategy = DecodeStrategy::kGreedy;
  std::size_t beam_width = 4;
  std::size_t max_len = 0;  // 0: p_r
};

// Autoregressive decoding from [BOS]; returns the words without [BOS]/[EOS].
// [PAD], [BOS] and [MASK] are never produced.
template <typename T>
std::vector<TokenId> generate_comment(const EncodedContext<T>& ctx, const ModelParams<T>& params,
                                      const GenerateOptions& options);

}  // namespace livechat::model
