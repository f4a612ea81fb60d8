#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "livechat/data/clip.hpp"
#include "livechat/data/corpus.hpp"

namespace livechat::data {

// Synthetic streams whose clips each carry a latent topic z. Frame features
// are a per-topic direction plus Gaussian noise, and transcript, context chat
// and response chat draw their words from the topic's unigram pool mixed with
// a shared pool, so every modality predicts the response topic.
struct SynthParams {
  std::size_t n_streams = 1;
  std::size_t clips_per_stream = 1;
  std::size_t n_topics = 1;
  std::size_t vocab_per_topic = 20;
  std::size_t d_frame = 64;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;
  std::size_t eval_streams = 0;  // extra streams written to the eval split
  std::size_t context_s = 20;
  std::size_t clip_s = 30;
  double shared_word_prob = 0.2;

  void validate() const;
};

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<RawStream> streams;         // train streams then eval streams
  std::vector<std::size_t> train_topics;  // latent topic per train clip
  std::vector<std::size_t> eval_topics;
};

SyntheticCorpus synthesize_corpus(const SynthParams& params);

// Topic word i of topic z, and shared word i.
std::string topic_word(std::size_t topic, std::size_t index);
std::string shared_word(std::size_t index);

}  // namespace livechat::data
