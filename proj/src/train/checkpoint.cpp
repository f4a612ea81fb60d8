#include "livechat/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "json.hpp"
#include "livechat/common/errors.hpp"

namespace livechat::train {
namespace {

using Kind = CheckpointError::Kind;

void put_u32(std::string& out, std::uint32_t x) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((x >> (8 * b)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t x) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((x >> (8 * b)) & 0xffu));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t x = 0;
  for (int b = 7; b >= 0; --b) x = (x << 8) | p[b];
  return x;
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t x = 0;
  for (int b = 3; b >= 0; --b) x = (x << 8) | p[b];
  return x;
}

}  // namespace

void save_checkpoint(const model::ModelParams<float>& params, std::uint64_t vocab_hash,
                     const std::filesystem::path& path, const nlohmann::json& metadata) {
  const auto named = params.named();
  nlohmann::json tensors = nlohmann::json::array();
  std::string payload;
  for (const auto& p : named) {
    tensors.push_back({{"name", p.name},
                       {"shape", p.tensor.shape()},
                       {"offset", payload.size()},
                       {"count", p.tensor.numel()}});
    for (float v : p.tensor.data()) put_u32(payload, std::bit_cast<std::uint32_t>(v));
  }
  const nlohmann::json header = {{"config", model::config_to_json(params.config)},
                                 {"vocab_size", params.vocab_size},
                                 {"vocab_hash", vocab_hash},
                                 {"tensors", tensors},
                                 {"metadata", metadata}};
  const std::string header_text = header.dump();
  std::string file(kCheckpointMagic, 8);
  put_u64(file, header_text.size());
  file += header_text;
  file += payload;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(file.data(), static_cast<std::streamsize>(file.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kFormat, "cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw CheckpointError(Kind::kTruncated, "checkpoint " + path.string() + " is truncated");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw CheckpointError(Kind::kFormat, path.string() + " is not a checkpoint file");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - 16) {
    throw CheckpointError(Kind::kTruncated, "checkpoint header of " + path.string() + " is truncated");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kFormat, "checkpoint header: " + std::string(e.what()));
  }
  const unsigned char* payload = bytes.data() + 16 + header_len;
  const std::size_t payload_size = bytes.size() - 16 - header_len;

  Checkpoint ckpt;
  try {
    ckpt.vocab_hash = header.at("vocab_hash").get<std::uint64_t>();
    if (header.contains("metadata")) ckpt.metadata = header.at("metadata");
    if (expected_vocab_hash && *expected_vocab_hash != ckpt.vocab_hash) {
      throw CheckpointError(Kind::kVocabMismatch, "checkpoint " + path.string() +
                                                      " was trained with a different vocabulary");
    }
    const model::ModelConfig config = model::config_from_json(header.at("config"));
    const auto vocab_size = header.at("vocab_size").get<std::size_t>();
    ckpt.params = model::ModelParams<float>::zeros(config, vocab_size);
    const auto named = ckpt.params.named();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != named.size()) {
      throw CheckpointError(Kind::kShapeMismatch, "checkpoint lists " + std::to_string(tensors.size()) +
                                                      " tensors, config implies " + std::to_string(named.size()));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      const auto& entry = tensors[i];
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<tensor::Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto count = entry.at("count").get<std::size_t>();
      tensor::Tensor<float> target = named[i].tensor;
      if (name != named[i].name || shape != target.shape() || count != target.numel()) {
        throw CheckpointError(Kind::kShapeMismatch, "checkpoint tensor " + name + " " + tensor::shape_string(shape) +
                                                        " does not match " + named[i].name + " " +
                                                        tensor::shape_string(target.shape()));
      }
      if (offset > payload_size || count * 4 > payload_size - offset) {
        throw CheckpointError(Kind::kTruncated, "checkpoint payload ends inside tensor " + name);
      }
      auto values = target.mutable_data();
      for (std::size_t k = 0; k < count; ++k) values[k] = std::bit_cast<float>(get_u32(payload + offset + 4 * k));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kFormat, "checkpoint header: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::kFormat, "checkpoint config: " + std::string(e.what()));
  }
  return ckpt;
}

}  // namespace livechat::train
