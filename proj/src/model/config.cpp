#include "livechat/model/config.hpp"

#include <string>

#include "livechat/common/errors.hpp"

namespace livechat::model {

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("model: d_model=" + std::to_string(d_model) + " must be a positive multiple of n_heads=" +
                      std::to_string(n_heads));
  }
  if (d_frame == 0 || d_ff == 0) throw ConfigError("model: d_frame and d_ff must be positive");
  if (encoder_layers == 0 || decoder_layers == 0) throw ConfigError("model: layer counts must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
  if (audio_tokens < 2 || comment_tokens < 2 || response_tokens < 2) {
    throw ConfigError("model: p_a, p_c and p_r must leave room for [BOS] and [EOS]");
  }
  if (context_comments == 0) throw ConfigError("model: n_c must be >= 1");
  if (context_s == 0 || context_s >= clip_s) {
    throw ConfigError("model: need 0 < T1 < T2, got T1=" + std::to_string(context_s) +
                      ", T2=" + std::to_string(clip_s));
  }
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},
          {"d_frame", c.d_frame},
          {"encoder_layers", c.encoder_layers},
          {"decoder_layers", c.decoder_layers},
          {"n_heads", c.n_heads},
          {"d_ff", c.d_ff},
          {"dropout", c.dropout},
          {"audio_tokens", c.audio_tokens},
          {"comment_tokens", c.comment_tokens},
          {"response_tokens", c.response_tokens},
          {"context_comments", c.context_comments},
          {"T1", c.context_s},
          {"T2", c.clip_s}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.d_frame = j.at("d_frame").get<std::size_t>();
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.audio_tokens = j.at("audio_tokens").get<std::size_t>();
  c.comment_tokens = j.at("comment_tokens").get<std::size_t>();
  c.response_tokens = j.at("response_tokens").get<std::size_t>();
  c.context_comments = j.at("context_comments").get<std::size_t>();
  c.context_s = j.at("T1").get<std::size_t>();
  c.clip_s = j.at("T2").get<std::size_t>();
  c.validate();
  return c;
}

}  // namespace livechat::model
