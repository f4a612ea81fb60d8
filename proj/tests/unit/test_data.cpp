#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "livechat/common/errors.hpp"
#include "livechat/common/rng.hpp"
#include "livechat/data/corpus.hpp"
#include "livechat/data/stats.hpp"
#include "livechat/data/synth.hpp"
#include "livechat/data/tokenizer.hpp"
#include "livechat/data/vocabulary.hpp"

using namespace livechat;
using namespace livechat::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "livechat_test_data" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RawStream stream_of(double duration, std::vector<std::pair<double, std::string>> comments, std::size_t d_frame = 2) {
  RawStream s;
  s.stream_id = "s";
  s.category = "cat";
  s.duration_s = duration;
  for (std::size_t t = 0; t < static_cast<std::size_t>(duration); ++t) {
    s.frames.push_back(std::vector<double>(d_frame, static_cast<double>(t)));
  }
  s.transcript = {{1.0, "hello there"}, {35.0, "second clip"}};
  for (auto& [t, text] : comments) s.comments.push_back(make_comment(t, text));
  return s;
}

DensestWindow oracle(const std::vector<double>& ts, double len) {
  DensestWindow best;
  for (double start : ts) {
    std::size_t count = 0;
    for (double t : ts) count += t >= start && t < start + len;
    if (count > best.count) best = {start, count};
  }
  return best;
}

}  // namespace

TEST_CASE("tokenize examples") {
  CHECK(tokenize("Hello   WORLD") == std::vector<std::string>{"hello", "world"});
  CHECK(tokenize("PogChamp") == std::vector<std::string>{"pogchamp"});
  CHECK(tokenize("").empty());
  const auto tokens = tokenize("  lul  KEKW  gg ");
  CHECK(tokenize(join_tokens(tokens)) == tokens);
}

TEST_CASE("build_vocabulary examples") {
  const std::vector<std::vector<std::string>> corpus{tokenize("a a b")};
  const auto vocab = build_vocabulary(corpus, 2, 100);
  CHECK(vocab.size() == 6);
  CHECK(vocab.id("a") == 5);
  CHECK(vocab.id("b") == kUnk);
  CHECK(vocab.token(kPad) == "[PAD]");
  CHECK(vocab.id("[PAD]") == 0);
  CHECK(vocab.id("[UNK]") == 1);
  CHECK(vocab.id("[BOS]") == 2);
  CHECK(vocab.id("[EOS]") == 3);
  CHECK(vocab.id("[MASK]") == 4);

  const std::vector<std::vector<std::string>> bigger{tokenize("x y y z z z")};
  const auto tiny = build_vocabulary(bigger, 1, 6);
  CHECK(tiny.size() == 6);
  CHECK(tiny.token(5) == "z");

  // Equal counts rank in byte order.
  const auto tied = build_vocabulary(std::vector<std::vector<std::string>>{tokenize("b a c")}, 1, 100);
  CHECK(tied.token(5) == "a");
  CHECK(tied.token(6) == "b");
  CHECK(tied.token(7) == "c");
}

TEST_CASE("vocabulary round trip and encoding") {
  const std::vector<std::vector<std::string>> corpus{tokenize("one two two three three three")};
  const auto vocab = build_vocabulary(corpus, 1, 100);
  const auto dir = scratch("vocab");
  vocab.save(dir / "vocab.tsv");
  const auto loaded = Vocabulary::load(dir / "vocab.tsv");
  CHECK(loaded.size() == vocab.size());
  CHECK(loaded.hash() == vocab.hash());
  const std::vector<std::string> words{"three", "zzz", "one"};
  const auto ids = vocab.encode(words);
  CHECK(ids == std::vector<tensor::TokenId>{5, kUnk, 7});
  CHECK(vocab.decode(ids) == std::vector<std::string>{"three", "[UNK]", "one"});
  CHECK_THROWS(vocab.token(99));
  CHECK(build_vocabulary(corpus, 1, 7).hash() != vocab.hash());
}

TEST_CASE("densest_window examples") {
  const std::vector<double> a{0, 1, 1, 5, 6};
  const auto w = densest_window(a, 2.0);
  CHECK(w.start == 0.0);
  CHECK(w.count == 3);
  const std::vector<double> b{0, 10};
  CHECK(densest_window(b, 1.0).start == 0.0);
  CHECK(densest_window(b, 1.0).count == 1);
  const std::vector<double> c{7};
  CHECK(densest_window(c, 100.0).start == 7.0);
  CHECK(densest_window(c, 100.0).count == 1);
}

TEST_CASE("densest_window matches the exhaustive oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> ts(1 + rng.below(300));
    for (auto& t : ts) t = std::floor(rng.uniform() * 2000.0) / 4.0;
    std::sort(ts.begin(), ts.end());
    const double len = 1.0 + static_cast<double>(rng.below(100));
    const auto got = densest_window(ts, len);
    const auto want = oracle(ts, len);
    REQUIRE(got.count == want.count);
    REQUIRE(got.start == want.start);
  }
}

TEST_CASE("crop_stream shifts the window to zero") {
  const auto s = stream_of(100, {{10, "a"}, {50, "b"}, {69.5, "c"}, {70, "d"}});
  const auto cropped = crop_stream(s, 40.0, 30.0);
  REQUIRE(cropped.comments.size() == 2);
  CHECK(cropped.comments[0].t == doctest::Approx(10.0));
  CHECK(cropped.comments[1].t == doctest::Approx(29.5));
  CHECK(cropped.frames.size() == 30);
  CHECK(cropped.frames[0][0] == 40.0);
}

TEST_CASE("slice_clips examples") {
  const ClipTiming timing{20, 30, 2};
  const auto s = stream_of(90, {{19.9, "ctx"}, {20.0, "resp"}, {25, "r2"}, {50, "r3"}, {85, "late"}});
  const auto clips = slice_clips(s, timing);
  REQUIRE(clips.size() == 3);
  CHECK(clips[0].t == 0.0);
  CHECK(clips[1].t == 30.0);
  CHECK(clips[2].t == 60.0);
  REQUIRE(clips[0].context_comments.size() == 1);
  CHECK(clips[0].context_comments[0].raw_text == "ctx");
  CHECK(clips[0].response_comments.size() == 2);
  CHECK(clips[0].response_comments[0].raw_text == "resp");
  CHECK(clips[0].frames.size() == 20);
  CHECK(clips[0].audio_tokens == std::vector<std::string>{"hello", "there"});
  CHECK(clips[1].clip_id == "s#1");
  CHECK(clips[1].stream_id() == "s");

  const auto dropped = slice_clips(stream_of(90, {{5, "only context"}, {55, "r"}}), timing);
  REQUIRE(dropped.size() == 1);
  CHECK(dropped[0].t == 30.0);

  CHECK_THROWS_AS((ClipTiming{30, 30, 2}.validate()), ConfigError);
}

TEST_CASE("slice_clips places every comment at most once") {
  Rng rng(4);
  const ClipTiming timing{20, 30, 1};
  std::vector<std::pair<double, std::string>> comments;
  for (int i = 0; i < 500; ++i) comments.emplace_back(std::floor(rng.uniform() * 3100.0) / 10.0, "w");
  std::sort(comments.begin(), comments.end());
  const auto clips = slice_clips(stream_of(300, comments, 1), timing);
  std::size_t placed = 0;
  for (const auto& clip : clips) {
    for (const auto& c : clip.context_comments) CHECK((c.t >= clip.t && c.t < clip.t + 20));
    for (const auto& c : clip.response_comments) CHECK((c.t >= clip.t + 20 && c.t < clip.t + 30));
    placed += clip.context_comments.size() + clip.response_comments.size();
  }
  std::size_t inside = 0;
  for (const auto& [t, text] : comments) {
    const double start = std::floor(t / 30.0) * 30.0;
    bool has_response = false;
    for (const auto& [u, x] : comments) has_response |= u >= start + 20 && u < start + 30;
    inside += t < 300.0 && has_response;
  }
  CHECK(placed == inside);
}

TEST_CASE("select_context_comments examples") {
  ClipExample clip;
  for (int i = 0; i < 7; ++i) clip.context_comments.push_back(make_comment(i, "c" + std::to_string(i)));
  const auto five = select_context_comments(clip, 5);
  REQUIRE(five.size() == 5);
  for (int i = 0; i < 5; ++i) {
    REQUIRE(five[i].comment.has_value());
    CHECK(five[i].comment->raw_text == "c" + std::to_string(i + 2));
    CHECK_FALSE(five[i].masked);
  }
  clip.context_comments.resize(3);
  const auto padded = select_context_comments(clip, 5);
  CHECK(padded[0].masked);
  CHECK(padded[1].masked);
  CHECK_FALSE(padded[0].comment.has_value());
  CHECK(padded[2].comment->raw_text == "c0");
  CHECK(padded[4].comment->raw_text == "c2");

  ClipExample ties;
  ties.context_comments = {make_comment(1, "first"), make_comment(1, "second"), make_comment(1, "third")};
  const auto two = select_context_comments(ties, 2);
  CHECK(two[0].comment->raw_text == "second");
  CHECK(two[1].comment->raw_text == "third");
}

TEST_CASE("synthesize_corpus") {
  SynthParams p;
  p.n_streams = 3;
  p.clips_per_stream = 4;
  p.n_topics = 2;
  p.d_frame = 8;
  p.seed = 5;
  p.eval_streams = 1;
  const auto a = synthesize_corpus(p);
  CHECK(a.corpus.train.size() == 12);
  CHECK(a.corpus.eval.size() == 4);
  CHECK(a.train_topics.size() == 12);
  CHECK(corpus_stats(a.corpus.train, 30).n_videos == 3);
  for (const auto& clip : a.corpus.train) {
    CHECK(clip.frames.size() == 20);
    CHECK(clip.frames[0].size() == 8);
    CHECK_FALSE(clip.response_comments.empty());
  }

  const auto d1 = scratch("synth1"), d2 = scratch("synth2");
  write_corpus(d1, a.corpus);
  write_corpus(d2, synthesize_corpus(p).corpus);
  for (const char* f : {kManifestFile, kTrainFile, kEvalFile}) CHECK(slurp(d1 / f) == slurp(d2 / f));
  p.seed = 6;
  const auto d3 = scratch("synth3");
  write_corpus(d3, synthesize_corpus(p).corpus);
  CHECK(slurp(d1 / kTrainFile) != slurp(d3 / kTrainFile));

  // One topic: every response word comes from topic 0 or the shared pool.
  p.n_topics = 1;
  const auto single = synthesize_corpus(p);
  std::set<std::string> allowed;
  for (std::size_t i = 0; i < p.vocab_per_topic; ++i) {
    allowed.insert(topic_word(0, i));
    allowed.insert(shared_word(i));
  }
  for (const auto& clip : single.corpus.train) {
    for (const auto& c : clip.response_comments) {
      for (const auto& w : c.tokens) CHECK(allowed.count(w) == 1);
    }
  }

  SynthParams bad = p;
  bad.n_topics = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("synthetic topics are uniform") {
  SynthParams p;
  p.n_streams = 100;
  p.clips_per_stream = 10;
  p.n_topics = 4;
  p.d_frame = 4;
  p.seed = 11;
  const auto s = synthesize_corpus(p);
  std::map<std::size_t, std::size_t> counts;
  for (auto z : s.train_topics) ++counts[z];
  const double n = 1000.0, expect = n / 4.0, sigma = std::sqrt(n * 0.25 * 0.75);
  for (std::size_t z = 0; z < 4; ++z) CHECK(std::abs(static_cast<double>(counts[z]) - expect) <= 3 * sigma);
}

TEST_CASE("corpus files round trip") {
  SynthParams p;
  p.n_streams = 2;
  p.clips_per_stream = 3;
  p.n_topics = 2;
  p.d_frame = 4;
  p.eval_streams = 1;
  const auto s = synthesize_corpus(p);
  const auto dir = scratch("roundtrip");
  write_corpus(dir, s.corpus);
  const auto back = read_corpus(dir);
  CHECK(back.manifest.d_frame == 4);
  CHECK(back.manifest.n_train == 6);
  CHECK(back.manifest.n_eval == 3);
  REQUIRE(back.train.size() == 6);
  CHECK(clip_to_json(back.train[2]) == clip_to_json(s.corpus.train[2]));

  write_raw_streams(dir / "streams.jsonl", s.streams);
  const auto streams = read_raw_streams(dir / "streams.jsonl");
  REQUIRE(streams.size() == 3);
  CHECK(streams[0].comments.size() == s.streams[0].comments.size());

  std::ofstream(dir / kTrainFile, std::ios::app) << "{not json\n";
  CHECK_THROWS_AS(read_corpus(dir), FormatError);
}

TEST_CASE("corpus_stats example") {
  ClipExample clip;
  clip.clip_id = "v#0";
  clip.context_comments = {make_comment(1, "a b c d e"), make_comment(5, "f g")};
  clip.response_comments = {make_comment(25, "h i j k l")};
  const std::vector<ClipExample> clips{clip};
  const auto stats = corpus_stats(clips, 30);
  CHECK(stats.n_videos == 1);
  CHECK(stats.n_comments == 3);
  CHECK(stats.duration_s == doctest::Approx(30.0));
  CHECK(stats.comment_density_cps == doctest::Approx(0.1));
  CHECK(stats.avg_words_per_comment == doctest::Approx(4.0));
  CHECK(stats.vocab_size_unique_words == 12);
  CHECK(stats.words_per_comment_histogram.at(5) == 2);
  CHECK(stats.words_per_comment_histogram.at(2) == 1);
  CHECK_THROWS(corpus_stats(std::vector<ClipExample>{}, 30));
}
