#include "livechat/train/trainer.hpp"

#include <numeric>
#include <stdexcept>

#include "livechat/common/errors.hpp"
#include "livechat/tensor/tape.hpp"

namespace livechat::train {
namespace {

using model::ForwardMode;
using model::ModelParams;
using tensor::Tape;
using tensor::TapeScope;
using tensor::Tensor;

constexpr std::uint64_t kPretrainSalt = 1;
constexpr std::uint64_t kTrainSalt = 2;

bool maskable(TokenId id) {
  return id != data::kPad && id != data::kBos && id != data::kEos && id != data::kMask;
}

template <typename T>
std::vector<model::NamedTensor<T>> select_params(const ModelParams<T>& params, bool text_only) {
  std::vector<model::NamedTensor<T>> out;
  for (auto& p : params.named()) {
    if (!text_only || model::is_text_encoder_param(p.name)) out.push_back(p);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(p_mask >= 0.0 && p_mask <= 1.0)) throw ConfigError("train: p_mask must lie in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (grad_clip < 0.0) throw ConfigError("train: grad_clip must be >= 0");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"batch_size", c.batch_size},
          {"epochs_pretrain", c.epochs_pretrain},
          {"epochs_train", c.epochs_train},
          {"p_mask", c.p_mask},
          {"augmentation", c.augmentation},
          {"seed", c.seed},
          {"grad_clip", c.grad_clip}};
}

MaskedTokens mask_for_mlm(std::span<const TokenId> ids, double p_mask, Rng& rng) {
  if (!(p_mask >= 0.0 && p_mask <= 1.0)) throw ConfigError("mask_for_mlm: p_mask must lie in [0, 1]");
  MaskedTokens out;
  out.ids.assign(ids.begin(), ids.end());
  out.labels.assign(ids.size(), tensor::kIgnoreId);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!maskable(ids[i])) continue;
    if (rng.bernoulli(p_mask)) {
      out.labels[i] = ids[i];
      out.ids[i] = data::kMask;
      ++out.n_masked;
    }
  }
  return out;
}

std::size_t select_target_index(std::span<const data::CommentRecord> responses, bool augmentation, Rng& rng) {
  if (responses.empty()) throw std::invalid_argument("select_target: empty response window");
  if (augmentation) return rng.below(responses.size());
  std::size_t best = 0;
  for (std::size_t i = 1; i < responses.size(); ++i) {
    if (responses[i].t < responses[best].t) best = i;
  }
  return best;
}

const data::CommentRecord& select_target(std::span<const data::CommentRecord> responses, bool augmentation,
                                         Rng& rng) {
  return responses[select_target_index(responses, augmentation, rng)];
}

template <typename T>
std::vector<PreparedClip<T>> prepare_clips(const std::vector<data::ClipExample>& clips,
                                           const data::Vocabulary& vocab, const model::ModelConfig& config,
                                           std::size_t n_context) {
  std::vector<PreparedClip<T>> out;
  out.reserve(clips.size());
  for (const auto& clip : clips) {
    PreparedClip<T> p;
    p.clip_id = clip.clip_id;
    p.inputs = model::make_clip_inputs<T>(clip, vocab, config, n_context);
    p.responses = clip.response_comments;
    for (const auto& r : clip.response_comments) p.response_ids.push_back(vocab.encode(r.tokens));
    out.push_back(std::move(p));
  }
  return out;
}

template <typename T>
Tensor<T> response_loss(const ModelParams<T>& params, const model::ClipInputs<T>& inputs,
                        std::span<const TokenId> response, const ForwardMode& mode) {
  const model::DecoderPair pair = model::decoder_pair(response, params.config.response_tokens);
  const auto ctx = model::encode_context(inputs, params, mode);
  const Tensor<T> logits = model::decoder_forward<T>(pair.input, ctx, params, mode);
  return tensor::cross_entropy_masked<T>(logits, pair.labels);
}

template <typename T>
Tensor<T> mlm_loss(const ModelParams<T>& params, const model::ClipInputs<T>& inputs, double p_mask,
                   Rng& mask_rng, const ForwardMode& mode) {
  const MaskedTokens audio = mask_for_mlm(inputs.audio_ids, p_mask, mask_rng);
  const MaskedTokens comments = mask_for_mlm(inputs.comment_ids, p_mask, mask_rng);
  const std::size_t total = audio.n_masked + comments.n_masked;
  if (total == 0) return {};
  Tensor<T> loss;
  auto accumulate = [&](const Tensor<T>& states, const MaskedTokens& masked) {
    const Tensor<T> part = tensor::cross_entropy_masked<T>(model::mlm_logits(states, params), masked.labels);
    const Tensor<T> weighted = tensor::scale(part, static_cast<T>(static_cast<double>(masked.n_masked) / total));
    loss = loss.defined() ? tensor::add(loss, weighted) : weighted;
  };
  if (audio.n_masked > 0) {
    accumulate(model::audio_states<T>(audio.ids, inputs.audio_valid, params, mode), audio);
  }
  if (comments.n_masked > 0) {
    accumulate(model::comment_states<T>(comments.ids, inputs.comment_valid, params, mode), comments);
  }
  return loss;
}

nlohmann::json epoch_log_to_json(const EpochLog& log) {
  return {{"stage", log.stage}, {"epoch", log.epoch}, {"mean_loss", log.mean_loss}};
}

template <typename T>
Trainer<T>::Trainer(ModelParams<T>& params, const TrainConfig& config)
    : params_(params),
      config_(config),
      pretrain_opt_(select_params(params, true), config.lr),
      train_opt_(select_params(params, false), config.lr) {
  config_.validate();
}

template <typename T>
double Trainer<T>::pretrain_epoch(const std::vector<PreparedClip<T>>& clips) {
  if (config_.p_mask == 0.0) {
    throw ConfigError("pretrain: p_mask=0 masks nothing, the masked-language-model loss is undefined");
  }
  return run_epoch(clips, true);
}

template <typename T>
double Trainer<T>::train_epoch(const std::vector<PreparedClip<T>>& clips) {
  return run_epoch(clips, false);
}

template <typename T>
double Trainer<T>::run_epoch(const std::vector<PreparedClip<T>>& clips, bool pretraining) {
  if (clips.empty()) throw std::invalid_argument("training needs at least one clip");
  const std::size_t epoch = pretraining ? pretrain_epoch_++ : train_epoch_++;
  const std::uint64_t base = mix_seed(config_.seed, (pretraining ? kPretrainSalt : kTrainSalt) << 32 | epoch);
  Rng order_rng(mix_seed(base, 0));
  Rng target_rng(mix_seed(base, 1));
  Rng dropout_rng(mix_seed(base, 2));
  Rng mask_rng(mix_seed(base, 3));
  Adam<T>& opt = pretraining ? pretrain_opt_ : train_opt_;

  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  order_rng.shuffle(order);

  const ForwardMode mode = ForwardMode::train(dropout_rng);
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    params_.zero_grad();
    std::size_t contributing = 0;
    for (std::size_t b = start; b < end; ++b) {
      const PreparedClip<T>& clip = clips[order[b]];
      Tape<T> tape;
      TapeScope<T> scope(tape);
      Tensor<T> loss;
      if (pretraining) {
        loss = mlm_loss(params_, clip.inputs, config_.p_mask, mask_rng, mode);
        if (!loss.defined()) continue;
      } else {
        const std::size_t target = select_target_index(clip.responses, config_.augmentation, target_rng);
        loss = response_loss<T>(params_, clip.inputs, clip.response_ids[target], mode);
      }
      loss_sum += static_cast<double>(loss.item());
      ++loss_count;
      ++contributing;
      tape.backward(loss);
    }
    if (contributing == 0) continue;
    const T inv = T(1) / static_cast<T>(contributing);
    for (const auto& p : opt.params()) {
      if (!p.tensor.has_grad()) continue;
      for (T& g : p.tensor.mutable_grad()) g *= inv;
    }
    if (config_.grad_clip > 0.0) clip_gradients(opt.params(), config_.grad_clip);
    opt.step();
  }
  params_.zero_grad();
  if (loss_count == 0) throw std::runtime_error("pretrain: no position was masked in a whole epoch");
  return loss_sum / static_cast<double>(loss_count);
}

template <typename T>
std::vector<EpochLog> pretrain_mlm(ModelParams<T>& params, const std::vector<PreparedClip<T>>& clips,
                                   const TrainConfig& config, const EpochCallback& on_epoch) {
  if (config.p_mask == 0.0) {
    throw ConfigError("pretrain: p_mask=0 masks nothing, the masked-language-model loss is undefined");
  }
  Trainer<T> trainer(params, config);
  std::vector<EpochLog> logs;
  for (std::size_t e = 0; e < config.epochs_pretrain; ++e) {
    logs.push_back({"pretrain", e + 1, trainer.pretrain_epoch(clips)});
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

template <typename T>
std::vector<EpochLog> train_model(ModelParams<T>& params, const std::vector<PreparedClip<T>>& clips,
                                  const TrainConfig& config, const EpochCallback& on_epoch) {
  Trainer<T> trainer(params, config);
  std::vector<EpochLog> logs;
  for (std::size_t e = 0; e < config.epochs_train; ++e) {
    logs.push_back({"train", e + 1, trainer.train_epoch(clips)});
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

#define LIVECHAT_INSTANTIATE_TRAIN(T)                                                                        \
  template std::vector<PreparedClip<T>> prepare_clips<T>(const std::vector<data::ClipExample>&,               \
                                                         const data::Vocabulary&, const model::ModelConfig&,  \
                                                         std::size_t);                                        \
  template Tensor<T> response_loss(const ModelParams<T>&, const model::ClipInputs<T>&,                       \
                                   std::span<const TokenId>, const ForwardMode&);                            \
  template Tensor<T> mlm_loss(const ModelParams<T>&, const model::ClipInputs<T>&, double, Rng&,              \
                              const ForwardMode&);                                                           \
  template class Trainer<T>;                                                                                  \
  template std::vector<EpochLog> pretrain_mlm(ModelParams<T>&, const std::vector<PreparedClip<T>>&,          \
                                              const TrainConfig&, const EpochCallback&);                     \
  template std::vector<EpochLog> train_model(ModelParams<T>&, const std::vector<PreparedClip<T>>&,           \
                                             const TrainConfig&, const EpochCallback&);

LIVECHAT_INSTANTIATE_TRAIN(float)
LIVECHAT_INSTANTIATE_TRAIN(double)

}  // namespace livechat::train
