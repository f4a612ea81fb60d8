#pragma once

#include <cstddef>

#include "json.hpp"

namespace livechat::model {

// Structural hyperparameters. d_model is the shared hidden size of the video
// and text transformers; frames are projected from d_frame to d_model.
struct ModelConfig {
  std::size_t d_model = 256;
  std::size_t d_frame = 2048;
  std::size_t encoder_layers = 4;   // l_e
  std::size_t decoder_layers = 4;   // l_d
  std::size_t n_heads = 4;
  std::size_t d_ff = 1024;
  double dropout = 0.1;
  std::size_t audio_tokens = 64;    // p_a
  std::size_t comment_tokens = 16;  // p_c
  std::size_t response_tokens = 16; // p_r
  std::size_t context_comments = 5; // n_c
  std::size_t context_s = 20;       // T1
  std::size_t clip_s = 30;          // T2

  // Throws ConfigError on an inconsistent configuration.
  void validate() const;

  std::size_t head_dim() const { return d_model / n_heads; }
};

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace livechat::model
