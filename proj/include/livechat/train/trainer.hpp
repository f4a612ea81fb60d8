#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "livechat/common/rng.hpp"
#include "livechat/data/clip.hpp"
#include "livechat/data/vocabulary.hpp"
#include "livechat/model/model.hpp"
#include "livechat/train/optimizer.hpp"

namespace livechat::train {

using tensor::TokenId;

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs_pretrain = 100;
  std::size_t epochs_train = 200;
  double p_mask = 0.15;
  bool augmentation = false;
  std::uint64_t seed = 0;
  double grad_clip = 0.0;  // 0: off

  // Throws ConfigError unless 0 <= p_mask <= 1, lr > 0 and batch_size >= 1.
  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);

struct MaskedTokens {
  std::vector<TokenId> ids;     // input with [MASK] substitutions
  std::vector<TokenId> labels;  // original id where masked, ignore id elsewhere
  std::size_t n_masked = 0;
};

// Every position holding an ordinary token (not [PAD], [BOS], [EOS] or
// [MASK]) is replaced by [MASK] with probability p_mask.
MaskedTokens mask_for_mlm(std::span<const TokenId> ids, double p_mask, Rng& rng);

// Index of the training target: uniform over the response window when
// augmenting, otherwise the earliest comment (first in list order on ties).
std::size_t select_target_index(std::span<const data::CommentRecord> responses, bool augmentation, Rng& rng);

const data::CommentRecord& select_target(std::span<const data::CommentRecord> responses, bool augmentation,
                                         Rng& rng);

// Model-ready clip: laid-out inputs plus the encoded response comments.
template <typename T>
struct PreparedClip {
  std::string clip_id;
  model::ClipInputs<T> inputs;
  std::vector<data::CommentRecord> responses;
  std::vector<std::vector<TokenId>> response_ids;  // parallel to responses
};

template <typename T>
std::vector<PreparedClip<T>> prepare_clips(const std::vector<data::ClipExample>& clips,
                                           const data::Vocabulary& vocab, const model::ModelConfig& config,
                                           std::size_t n_context);

// Teacher-forced cross-entropy of one response given its clip.
template <typename T>
tensor::Tensor<T> response_loss(const model::ModelParams<T>& params, const model::ClipInputs<T>& inputs,
                                std::span<const TokenId> response, const model::ForwardMode& mode);

// Masked-language-model loss of one clip: the mean over every masked position
// of its transcript and context comments. Returns an undefined tensor when
// nothing was masked.
template <typename T>
tensor::Tensor<T> mlm_loss(const model::ModelParams<T>& params, const model::ClipInputs<T>& inputs,
                           double p_mask, Rng& mask_rng, const model::ForwardMode& mode);

struct EpochLog {
  std::string stage;  // "pretrain" or "train"
  std::size_t epoch = 0;
  double mean_loss = 0.0;
};

nlohmann::json epoch_log_to_json(const EpochLog& log);

using EpochCallback = std::function<void(const EpochLog&)>;

// Runs both stages. Batches are whole clips in an order shuffled per epoch
// from the seed; each batch is one optimizer step on the mean clip loss.
template <typename T>
class Trainer {
 public:
  Trainer(model::ModelParams<T>& params, const TrainConfig& config);

  // One pass of masked-language-model pretraining; updates only the text
  // encoders and the tied head. Returns the mean masked-token loss.
  double pretrain_epoch(const std::vector<PreparedClip<T>>& clips);

  // One pass of teacher-forced training over every parameter.
  double train_epoch(const std::vector<PreparedClip<T>>& clips);

  std::size_t pretrain_epochs_done() const { return pretrain_epoch_; }
  std::size_t train_epochs_done() const { return train_epoch_; }

 private:
  double run_epoch(const std::vector<PreparedClip<T>>& clips, bool pretraining);

  model::ModelParams<T>& params_;
  TrainConfig config_;
  Adam<T> pretrain_opt_;
  Adam<T> train_opt_;
  std::size_t pretrain_epoch_ = 0;
  std::size_t train_epoch_ = 0;
};

// Fresh optimizer runs of config.epochs_pretrain pretraining epochs and
// config.epochs_train training epochs respectively.
template <typename T>
std::vector<EpochLog> pretrain_mlm(model::ModelParams<T>& params, const std::vector<PreparedClip<T>>& clips,
                                   const TrainConfig& config, const EpochCallback& on_epoch = {});

template <typename T>
std::vector<EpochLog> train_model(model::ModelParams<T>& params, const std::vector<PreparedClip<T>>& clips,
                                  const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace livechat::train
