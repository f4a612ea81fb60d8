#include "livechat/data/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "livechat/common/errors.hpp"

namespace livechat::data {

using nlohmann::json;

namespace {

json comments_to_json(const std::vector<CommentRecord>& comments) {
  json arr = json::array();
  for (const auto& c : comments) arr.push_back({{"t", c.t}, {"text", c.raw_text}});
  return arr;
}

std::vector<CommentRecord> comments_from_json(const json& arr) {
  std::vector<CommentRecord> out;
  for (const auto& c : arr) out.push_back(make_comment(c.at("t").get<double>(), c.at("text").get<std::string>()));
  return out;
}

std::vector<std::vector<double>> frames_from_json(const json& arr, std::size_t d_frame,
                                                  const std::string& where) {
  std::vector<std::vector<double>> frames;
  frames.reserve(arr.size());
  for (const auto& row : arr) {
    auto values = row.get<std::vector<double>>();
    if (d_frame != 0 && values.size() != d_frame) {
      throw ShapeError(where + ": frame with " + std::to_string(values.size()) +
                       " features, expected " + std::to_string(d_frame));
    }
    frames.push_back(std::move(values));
  }
  return frames;
}

void write_lines(const std::filesystem::path& path, const std::vector<ClipExample>& clips) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& clip : clips) out << clip_to_json(clip).dump() << '\n';
}

std::vector<ClipExample> read_lines(const std::filesystem::path& path, std::size_t d_frame) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<ClipExample> clips;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      clips.push_back(clip_from_json(json::parse(line), d_frame));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return clips;
}

}  // namespace

json clip_to_json(const ClipExample& clip) {
  return {{"clip_id", clip.clip_id},
          {"category", clip.category},
          {"t", clip.t},
          {"frames", clip.frames},
          {"audio_tokens", clip.audio_tokens},
          {"context_comments", comments_to_json(clip.context_comments)},
          {"response_comments", comments_to_json(clip.response_comments)}};
}

ClipExample clip_from_json(const json& j, std::size_t d_frame) {
  ClipExample clip;
  clip.clip_id = j.at("clip_id").get<std::string>();
  clip.category = j.at("category").get<std::string>();
  clip.t = j.at("t").get<double>();
  clip.frames = frames_from_json(j.at("frames"), d_frame, clip.clip_id);
  clip.audio_tokens = j.at("audio_tokens").get<std::vector<std::string>>();
  clip.context_comments = comments_from_json(j.at("context_comments"));
  clip.response_comments = comments_from_json(j.at("response_comments"));
  return clip;
}

json manifest_to_json(const CorpusManifest& m) {
  return {{"d_frame", m.d_frame},
          {"T1", m.context_s},
          {"T2", m.clip_s},
          {"n_clips", m.n_clips()},
          {"splits", {{"train", m.n_train}, {"eval", m.n_eval}}}};
}

CorpusManifest manifest_from_json(const json& j) {
  CorpusManifest m;
  m.d_frame = j.at("d_frame").get<std::size_t>();
  m.context_s = j.at("T1").get<std::size_t>();
  m.clip_s = j.at("T2").get<std::size_t>();
  const auto& splits = j.at("splits");
  m.n_train = splits.at("train").get<std::size_t>();
  m.n_eval = splits.value("eval", std::size_t{0});
  if (j.at("n_clips").get<std::size_t>() != m.n_clips()) {
    throw FormatError("manifest: n_clips disagrees with split sizes");
  }
  return m;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  CorpusManifest manifest = corpus.manifest;
  manifest.n_train = corpus.train.size();
  manifest.n_eval = corpus.eval.size();
  {
    std::ofstream out(dir / kManifestFile, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << manifest_to_json(manifest).dump(2) << '\n';
  }
  write_lines(dir / kTrainFile, corpus.train);
  if (!corpus.eval.empty()) {
    write_lines(dir / kEvalFile, corpus.eval);
  } else {
    std::filesystem::remove(dir / kEvalFile);
  }
}

Corpus read_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  std::ifstream in(dir / kManifestFile, std::ios::binary);
  if (!in) throw std::runtime_error("no corpus manifest in " + dir.string());
  try {
    corpus.manifest = manifest_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw FormatError("manifest in " + dir.string() + ": " + e.what());
  }
  corpus.train = read_lines(dir / kTrainFile, corpus.manifest.d_frame);
  if (std::filesystem::exists(dir / kEvalFile)) {
    corpus.eval = read_lines(dir / kEvalFile, corpus.manifest.d_frame);
  }
  if (corpus.train.size() != corpus.manifest.n_train || corpus.eval.size() != corpus.manifest.n_eval) {
    throw FormatError("corpus in " + dir.string() + " does not match its manifest counts");
  }
  return corpus;
}

std::vector<RawStream> read_raw_streams(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::vector<RawStream> streams;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      RawStream s;
      s.stream_id = j.at("stream_id").get<std::string>();
      s.category = j.value("category", std::string{});
      s.frames = frames_from_json(j.value("frames", json::array()), 0, s.stream_id);
      for (const auto& seg : j.value("transcript", json::array()))
        s.transcript.push_back({seg.at("t").get<double>(), seg.at("text").get<std::string>()});
      s.comments = comments_from_json(j.value("comments", json::array()));
      double duration = static_cast<double>(s.frames.size());
      for (const auto& c : s.comments) duration = std::max(duration, c.t);
      for (const auto& seg : s.transcript) duration = std::max(duration, seg.t);
      s.duration_s = j.value("duration", duration);
      streams.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return streams;
}

void write_raw_streams(const std::filesystem::path& file, const std::vector<RawStream>& streams) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (const auto& s : streams) {
    json transcript = json::array();
    for (const auto& seg : s.transcript) transcript.push_back({{"t", seg.t}, {"text", seg.text}});
    json j = {{"stream_id", s.stream_id},       {"category", s.category},
              {"duration", s.duration_s},       {"frames", s.frames},
              {"transcript", transcript},       {"comments", comments_to_json(s.comments)}};
    out << j.dump() << '\n';
  }
}

std::vector<std::vector<std::string>> text_sequences(const std::vector<ClipExample>& clips) {
  std::vector<std::vector<std::string>> out;
  for (const auto& clip : clips) {
    if (!clip.audio_tokens.empty()) out.push_back(clip.audio_tokens);
    for (const auto& c : clip.context_comments) out.push_back(c.tokens);
    for (const auto& c : clip.response_comments) out.push_back(c.tokens);
  }
  return out;
}

}  // namespace livechat::data
