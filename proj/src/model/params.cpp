#include "livechat/model/params.hpp"

#include <string>

#include "livechat/common/rng.hpp"

namespace livechat::model {
namespace {

using tensor::Shape;

enum class Kind { kWeight, kBias, kGain };

template <typename T, typename Fn>
void walk_layer_norm(const std::string& name, LayerNormParams<T>& ln, std::size_t d, Fn& fn) {
  fn(name + ".gamma", ln.gamma, Shape{d}, Kind::kGain);
  fn(name + ".beta", ln.beta, Shape{d}, Kind::kBias);
}

template <typename T, typename Fn>
void walk_attention(const std::string& name, AttentionParams<T>& a, std::size_t d, Fn& fn) {
  fn(name + ".wq", a.wq, Shape{d, d}, Kind::kWeight);
  fn(name + ".bq", a.bq, Shape{d}, Kind::kBias);
  fn(name + ".wk", a.wk, Shape{d, d}, Kind::kWeight);
  fn(name + ".bk", a.bk, Shape{d}, Kind::kBias);
  fn(name + ".wv", a.wv, Shape{d, d}, Kind::kWeight);
  fn(name + ".bv", a.bv, Shape{d}, Kind::kBias);
  fn(name + ".wo", a.wo, Shape{d, d}, Kind::kWeight);
  fn(name + ".bo", a.bo, Shape{d}, Kind::kBias);
}

template <typename T, typename Fn>
void walk_ffn(const std::string& name, FeedForwardParams<T>& f, std::size_t d, std::size_t d_ff, Fn& fn) {
  fn(name + ".w1", f.w1, Shape{d, d_ff}, Kind::kWeight);
  fn(name + ".b1", f.b1, Shape{d_ff}, Kind::kBias);
  fn(name + ".w2", f.w2, Shape{d_ff, d}, Kind::kWeight);
  fn(name + ".b2", f.b2, Shape{d}, Kind::kBias);
}

template <typename T, typename Fn>
void walk_encoder(const std::string& name, EncoderParams<T>& e, const ModelConfig& c, Fn& fn) {
  e.layers.resize(c.encoder_layers);
  for (std::size_t i = 0; i < e.layers.size(); ++i) {
    const std::string prefix = name + ".layers." + std::to_string(i);
    walk_layer_norm(prefix + ".ln_attn", e.layers[i].ln_attn, c.d_model, fn);
    walk_attention(prefix + ".attn", e.layers[i].attn, c.d_model, fn);
    walk_layer_norm(prefix + ".ln_ffn", e.layers[i].ln_ffn, c.d_model, fn);
    walk_ffn(prefix + ".ffn", e.layers[i].ffn, c.d_model, c.d_ff, fn);
  }
  walk_layer_norm(name + ".final_ln", e.final_ln, c.d_model, fn);
}

// Visits every parameter in checkpoint order with (name, tensor, shape, kind).
template <typename T, typename Fn>
void walk(ModelParams<T>& p, Fn fn) {
  const ModelConfig& c = p.config;
  const std::size_t d = c.d_model, vocab = p.vocab_size;
  fn("token_embedding", p.token_embedding, Shape{vocab, d}, Kind::kWeight);
  fn("pos_frames", p.pos_frames, Shape{c.context_s, d}, Kind::kWeight);
  fn("pos_audio", p.pos_audio, Shape{c.audio_tokens, d}, Kind::kWeight);
  fn("pos_comment", p.pos_comment, Shape{c.comment_tokens, d}, Kind::kWeight);
  fn("pos_response", p.pos_response, Shape{c.response_tokens, d}, Kind::kWeight);
  fn("frame_proj.w", p.frame_proj_w, Shape{c.d_frame, d}, Kind::kWeight);
  fn("frame_proj.b", p.frame_proj_b, Shape{d}, Kind::kBias);
  walk_encoder("video_encoder", p.video_encoder, c, fn);
  walk_encoder("audio_encoder", p.audio_encoder, c, fn);
  walk_encoder("comment_encoder", p.comment_encoder, c, fn);
  p.decoder_layers.resize(c.decoder_layers);
  for (std::size_t i = 0; i < p.decoder_layers.size(); ++i) {
    auto& layer = p.decoder_layers[i];
    const std::string prefix = "decoder.layers." + std::to_string(i);
    walk_layer_norm(prefix + ".ln_self", layer.ln_self, d, fn);
    walk_attention(prefix + ".self_attn", layer.self_attn, d, fn);
    walk_layer_norm(prefix + ".ln_video", layer.ln_video, d, fn);
    walk_attention(prefix + ".video_attn", layer.video_attn, d, fn);
    walk_layer_norm(prefix + ".ln_audio", layer.ln_audio, d, fn);
    walk_attention(prefix + ".audio_attn", layer.audio_attn, d, fn);
    walk_layer_norm(prefix + ".ln_comment", layer.ln_comment, d, fn);
    walk_attention(prefix + ".comment_attn", layer.comment_attn, d, fn);
    walk_layer_norm(prefix + ".ln_ffn", layer.ln_ffn, d, fn);
    walk_ffn(prefix + ".ffn", layer.ffn, d, c.d_ff, fn);
  }
  walk_layer_norm("decoder.final_ln", p.decoder_final_ln, d, fn);
  fn("output.w", p.output_w, Shape{d, vocab}, Kind::kWeight);
  fn("output.b", p.output_b, Shape{vocab}, Kind::kBias);
  fn("mlm_bias", p.mlm_bias, Shape{vocab}, Kind::kBias);
}

}  // namespace

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& config, std::size_t vocab_size,
                                    std::uint64_t seed, double init_std) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.vocab_size = vocab_size;
  Rng rng(seed);
  walk(p, [&](const std::string&, Tensor<T>& t, const Shape& shape, Kind kind) {
    std::vector<T> values(tensor::element_count(shape));
    for (auto& v : values) {
      switch (kind) {
        case Kind::kWeight:
          v = static_cast<T>(init_std * rng.normal());
          break;
        case Kind::kBias:
          v = T(0);
          break;
        case Kind::kGain:
          v = T(1);
          break;
      }
    }
    t = Tensor<T>(shape, std::move(values), true);
  });
  return p;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& config, std::size_t vocab_size) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.vocab_size = vocab_size;
  walk(p, [](const std::string&, Tensor<T>& t, const Shape& shape, Kind) {
    t = Tensor<T>::zeros(shape, true);
  });
  return p;
}

template <typename T>
std::vector<NamedTensor<T>> ModelParams<T>::named() const {
  ModelParams view = *this;
  std::vector<NamedTensor<T>> out;
  walk(view, [&](const std::string& name, Tensor<T>& t, const Shape&, Kind) { out.push_back({name, t}); });
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named()) n += p.tensor.numel();
  return n;
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams copy = *this;
  walk(copy, [](const std::string&, Tensor<T>& t, const Shape&, Kind) {
    Tensor<T> fresh = t.detach();
    fresh.set_requires_grad(t.requires_grad());
    t = fresh;
  });
  return copy;
}

template <typename T>
void ModelParams<T>::zero_grad() const {
  for (auto& p : named()) p.tensor.drop_grad();
}

std::size_t expected_parameter_count(const ModelConfig& c, std::size_t vocab_size) {
  const std::size_t d = c.d_model;
  const std::size_t layer_norm = 2 * d;
  const std::size_t attention = 4 * d * d + 4 * d;
  const std::size_t ffn = d * c.d_ff + c.d_ff + c.d_ff * d + d;
  const std::size_t encoder_layer = 2 * layer_norm + attention + ffn;
  const std::size_t encoder = c.encoder_layers * encoder_layer + layer_norm;
  const std::size_t decoder_layer = 5 * layer_norm + 4 * attention + ffn;
  const std::size_t decoder = c.decoder_layers * decoder_layer + layer_norm;
  const std::size_t embeddings =
      vocab_size * d + (c.context_s + c.audio_tokens + c.comment_tokens + c.response_tokens) * d;
  const std::size_t frame_proj = c.d_frame * d + d;
  const std::size_t heads = d * vocab_size + vocab_size + vocab_size;
  return embeddings + frame_proj + 3 * encoder + decoder + heads;
}

bool is_text_encoder_param(const std::string& name) {
  for (const char* prefix : {"token_embedding", "pos_audio", "pos_comment", "audio_encoder.",
                             "comment_encoder.", "mlm_bias"}) {
    if (name.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

template struct ModelParams<float>;
template struct ModelParams<double>;

}  // namespace livechat::model
