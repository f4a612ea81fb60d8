#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "livechat/model/config.hpp"
#include "livechat/tensor/tensor.hpp"

namespace livechat::model {

using tensor::Tensor;

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <typename T>
struct AttentionParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

template <typename T>
struct FeedForwardParams {
  Tensor<T> w1, b1, w2, b2;
};

template <typename T>
struct EncoderLayerParams {
  LayerNormParams<T> ln_attn;
  AttentionParams<T> attn;
  LayerNormParams<T> ln_ffn;
  FeedForwardParams<T> ffn;
};

template <typename T>
struct EncoderParams {
  std::vector<EncoderLayerParams<T>> layers;
  LayerNormParams<T> final_ln;
};

// Masked self-attention, then cross-attention over video, audio and comment
// memories in that order, then the feed-forward block.
template <typename T>
struct DecoderLayerParams {
  LayerNormParams<T> ln_self;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ln_video;
  AttentionParams<T> video_attn;
  LayerNormParams<T> ln_audio;
  AttentionParams<T> audio_attn;
  LayerNormParams<T> ln_comment;
  AttentionParams<T> comment_attn;
  LayerNormParams<T> ln_ffn;
  FeedForwardParams<T> ffn;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

// Every learnable array of the model. The token embedding is shared by the
// audio encoder, the comment encoder and the decoder input, and doubles as the
// (transposed) masked-language-model output head.
template <typename T>
struct ModelParams {
  ModelConfig config;
  std::size_t vocab_size = 0;

  Tensor<T> token_embedding;  // [vocab x d_model]
  Tensor<T> pos_frames;       // [T1 x d_model]
  Tensor<T> pos_audio;        // [p_a x d_model]
  Tensor<T> pos_comment;      // [p_c x d_model]
  Tensor<T> pos_response;     // [p_r x d_model]
  Tensor<T> frame_proj_w;     // [d_frame x d_model]
  Tensor<T> frame_proj_b;
  EncoderParams<T> video_encoder;
  EncoderParams<T> audio_encoder;
  EncoderParams<T> comment_encoder;
  std::vector<DecoderLayerParams<T>> decoder_layers;
  LayerNormParams<T> decoder_final_ln;
  Tensor<T> output_w;  // [d_model x vocab]
  Tensor<T> output_b;  // [vocab]
  Tensor<T> mlm_bias;  // [vocab]

  // Weights ~ N(0, init_std^2), biases and layer-norm shifts zero, layer-norm
  // gains one.
  static ModelParams init(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed,
                          double init_std = 0.02);

  // Every array zero, layer-norm gains included: the model outputs uniform
  // distributions.
  static ModelParams zeros(const ModelConfig& config, std::size_t vocab_size);

  // Stable ordering used by checkpoints and optimizers.
  std::vector<NamedTensor<T>> named() const;

  std::size_t parameter_count() const;

  ModelParams clone() const;

  void zero_grad() const;
};

// Closed-form element count for a configuration.
std::size_t expected_parameter_count(const ModelConfig& config, std::size_t vocab_size);

// True for arrays that masked-language-model pretraining updates.
bool is_text_encoder_param(const std::string& name);

// Copies values between parameter sets of matching layout (e.g. float <-> double).
template <typename Dst, typename Src>
ModelParams<Dst> convert_params(const ModelParams<Src>& src) {
  ModelParams<Dst> dst = ModelParams<Dst>::zeros(src.config, src.vocab_size);
  auto from = src.named();
  auto to = dst.named();
  for (std::size_t i = 0; i < from.size(); ++i) {
    auto out = to[i].tensor.mutable_data();
    const auto in = from[i].tensor.data();
    for (std::size_t k = 0; k < in.size(); ++k) out[k] = static_cast<Dst>(in[k]);
  }
  return dst;
}

}  // namespace livechat::model
