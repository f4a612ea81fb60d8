#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "livechat/model/params.hpp"

namespace livechat::train {

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kFormat, kShapeMismatch, kTruncated, kVocabMismatch };

  CheckpointError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// File layout: the 8-byte magic "LCKPT001", a little-endian uint64 header
// length, a JSON header {config, vocab_size, vocab_hash, tensors: [{name,
// shape, offset, count}], metadata}, then every tensor as little-endian float32 in
// manifest order. Offsets are bytes from the start of the payload.
inline constexpr char kCheckpointMagic[9] = "LCKPT001";

struct Checkpoint {
  model::ModelParams<float> params;
  std::uint64_t vocab_hash = 0;
  nlohmann::json metadata = nlohmann::json::object();  // free-form run information
};

void save_checkpoint(const model::ModelParams<float>& params, std::uint64_t vocab_hash,
                     const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object());

// Validates the manifest against the shapes the stored config implies and,
// when given, the vocabulary hash.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

}  // namespace livechat::train
