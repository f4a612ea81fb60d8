#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "livechat/data/clip.hpp"

namespace livechat::data {

// Sidecar manifest of a corpus directory.
struct CorpusManifest {
  std::size_t d_frame = 0;
  std::size_t context_s = 20;  // T1
  std::size_t clip_s = 30;     // T2
  std::size_t n_train = 0;
  std::size_t n_eval = 0;

  std::size_t n_clips() const { return n_train + n_eval; }
  ClipTiming timing() const { return {context_s, clip_s, d_frame}; }
};

// A corpus directory holds manifest.json, train.jsonl and (optionally)
// eval.jsonl, one ClipExample object per line.
struct Corpus {
  CorpusManifest manifest;
  std::vector<ClipExample> train;
  std::vector<ClipExample> eval;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kTrainFile = "train.jsonl";
inline constexpr const char* kEvalFile = "eval.jsonl";
inline constexpr const char* kVocabFile = "vocab.tsv";

nlohmann::json clip_to_json(const ClipExample& clip);
ClipExample clip_from_json(const nlohmann::json& j, std::size_t d_frame);

nlohmann::json manifest_to_json(const CorpusManifest& m);
CorpusManifest manifest_from_json(const nlohmann::json& j);

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);

// Raw stream files: one stream object per line with stream_id, category,
// duration (optional), frames (1 fps), transcript [{t, text}], comments [{t, text}].
std::vector<RawStream> read_raw_streams(const std::filesystem::path& file);
void write_raw_streams(const std::filesystem::path& file, const std::vector<RawStream>& streams);

// Every comment text of the corpus split, for vocabulary and TF-IDF fitting.
std::vector<std::vector<std::string>> text_sequences(const std::vector<ClipExample>& clips);

}  // namespace livechat::data
