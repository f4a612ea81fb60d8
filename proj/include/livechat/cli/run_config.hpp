#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "livechat/model/config.hpp"
#include "livechat/train/trainer.hpp"

namespace livechat::cli {

// Every setting a pipeline run reads, as one flat JSON object. Defaults are
// the full-scale settings (4 layers, 256 hidden, lr 1e-4, batch 32, 100 + 200
// epochs, 5 training / 15 evaluation context comments).
struct RunConfig {
  model::ModelConfig model;
  std::size_t context_comments_eval = 15;
  train::TrainConfig train;
  double init_std = 0.02;
  std::string corpus;      // corpus directory; --corpus overrides
  std::string vocab;       // vocabulary file; empty: <corpus>/vocab.tsv
  std::string checkpoint;  // checkpoint path; --out / --ckpt override
  std::string out_dir;     // directory for epoch logs; empty: none

  RunConfig() {
    model.d_frame = 0;  // 0: take d_frame from the corpus manifest
  }

  // Model configuration with d_frame resolved against a corpus.
  model::ModelConfig model_for_corpus(std::size_t corpus_d_frame) const;
};

nlohmann::json run_config_to_json(const RunConfig& config);

// Keys of the file must belong to the schema; missing keys keep defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies "key=value" overrides; the value is read as JSON when it parses,
// otherwise as a string.
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);

}  // namespace livechat::cli
