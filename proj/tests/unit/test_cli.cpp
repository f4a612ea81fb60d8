#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "livechat/cli/cli.hpp"
#include "livechat/cli/run_config.hpp"
#include "livechat/common/errors.hpp"
#include "livechat/data/corpus.hpp"

using namespace livechat;
using namespace livechat::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "livechat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "livechat_test_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Tiny model settings for fast end-to-end runs.
std::vector<std::string> tiny_overrides() {
  return {"--set", "d_model=16", "--set", "d_ff=32", "--set", "encoder_layers=1", "--set", "decoder_layers=1",
          "--set", "n_heads=2",  "--set", "audio_tokens=12", "--set", "comment_tokens=6", "--set",
          "response_tokens=6", "--set", "lr=0.001", "--set", "batch_size=8"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("run config defaults carry the full-scale settings") {
  const RunConfig c;
  CHECK(c.train.lr == 1e-4);
  CHECK(c.train.batch_size == 32);
  CHECK(c.train.epochs_pretrain == 100);
  CHECK(c.train.epochs_train == 200);
  CHECK(c.model.encoder_layers == 4);
  CHECK(c.model.decoder_layers == 4);
  CHECK(c.model.d_model == 256);
  CHECK(c.model.dropout == 0.1);
  CHECK(c.model.context_comments == 5);
  CHECK(c.context_comments_eval == 15);
  const auto round = run_config_from_json(run_config_to_json(c));
  CHECK(run_config_to_json(round) == run_config_to_json(c));
}

TEST_CASE("run config schema") {
  CHECK_THROWS_AS(run_config_from_json({{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"d_model", "big"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"d_model", 64.5}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"d_model", -4}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"T1", 30}, {"T2", 30}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"p_mask", 2.0}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::array()), ConfigError);
  const auto c = run_config_from_json({{"lr", 1}, {"augmentation", true}, {"corpus", "data"}});
  CHECK(c.train.lr == 1.0);
  CHECK(c.train.augmentation);
  CHECK(c.corpus == "data");

  RunConfig o;
  apply_overrides(o, {"d_model=64", "corpus=some/dir", "dropout=0"});
  CHECK(o.model.d_model == 64);
  CHECK(o.corpus == "some/dir");
  CHECK(o.model.dropout == 0.0);
  CHECK_THROWS_AS(apply_overrides(o, {"nokey"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(o, {"nope=1"}), ConfigError);

  CHECK(o.model_for_corpus(12).d_frame == 12);
  apply_overrides(o, {"d_frame=8"});
  CHECK_THROWS_AS(o.model_for_corpus(12), ConfigError);
}

TEST_CASE("shipped presets load") {
  const fs::path root = LIVECHAT_SOURCE_DIR;
  const auto full = load_run_config(root / "configs" / "full.json");
  CHECK(full.model.d_model == 256);
  CHECK(full.train.epochs_train == 200);
  const auto desk = load_run_config(root / "configs" / "desk.json");
  CHECK(desk.model.d_model == 64);
  CHECK(desk.model.d_frame == 0);
}

TEST_CASE("usage and errors") {
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("evaluate") != std::string::npos);
  CHECK(run({"train", "--help"}).code == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"stats", "--corpus", "x", "--bogus"}).code == 2);
  CHECK(run({"evaluate", "--corpus", "x", "--ckpt", "y", "--strategy", "best"}).code == 2);
  const auto missing = run({"stats", "--corpus", "/nonexistent/corpus"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error") != std::string::npos);
}

TEST_CASE("pipeline end to end") {
  const auto dir = scratch();
  const std::string corpus = (dir / "corpus").string();
  REQUIRE(run({"synth", "--out", corpus, "--streams", "6", "--clips", "5", "--topics", "3", "--seed", "4",
               "--eval-streams", "2", "--d-frame", "8"})
              .code == 0);
  const auto again = (dir / "corpus2").string();
  REQUIRE(run({"synth", "--out", again, "--streams", "6", "--clips", "5", "--topics", "3", "--seed", "4",
               "--eval-streams", "2", "--d-frame", "8"})
              .code == 0);
  CHECK(slurp(fs::path(corpus) / "train.jsonl") == slurp(fs::path(again) / "train.jsonl"));

  REQUIRE(run({"build-vocab", "--corpus", corpus, "--min-freq", "1", "--max-size", "1000"}).code == 0);
  CHECK(fs::exists(fs::path(corpus) / "vocab.tsv"));

  const auto stats = run({"stats", "--corpus", corpus, "--out", (dir / "stats.json").string()});
  REQUIRE(stats.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "stats.json")).at("n_videos").get<int>() == 8);

  const auto pre_ckpt = (dir / "pre.ckpt").string();
  const auto pre = run(concat({"pretrain", "--corpus", corpus, "--out", pre_ckpt, "--set", "epochs_pretrain=2",
                               "--seed", "3", "--log", (dir / "pre.jsonl").string()},
                              tiny_overrides()));
  REQUIRE_MESSAGE(pre.code == 0, pre.err);
  const auto log = slurp(dir / "pre.jsonl");
  CHECK(std::count(log.begin(), log.end(), '\n') == 2);

  const auto ckpt = (dir / "model.ckpt").string();
  const auto train_args = concat({"train", "--corpus", corpus, "--init", pre_ckpt, "--set", "epochs_train=2",
                                  "--seed", "3", "--augment"},
                                 tiny_overrides());
  const auto trained = run(concat(train_args, {"--out", ckpt}));
  REQUIRE_MESSAGE(trained.code == 0, trained.err);
  const std::string first_bytes = slurp(ckpt);
  REQUIRE(run(concat(train_args, {"--out", ckpt})).code == 0);
  CHECK(slurp(ckpt) == first_bytes);

  for (const char* strategy : {"cosine", "popularity", "random"}) {
    const auto r1 = (dir / (std::string(strategy) + "1.json")).string();
    const auto r2 = (dir / (std::string(strategy) + "2.json")).string();
    for (const auto& out : {r1, r2}) {
      const auto ev = run({"evaluate", "--corpus", corpus, "--ckpt", ckpt, "--strategy", strategy, "--candidates",
                           "10", "--seed", "7", "--out", out});
      REQUIRE_MESSAGE(ev.code == 0, ev.err);
    }
    CHECK(slurp(r1) == slurp(r2));
    const auto report = nlohmann::json::parse(slurp(r1));
    CHECK(report.at("n_queries").get<int>() == 10);
    CHECK(report.at("augmentation").get<bool>());
  }

  const std::string eval_lines = slurp(fs::path(corpus) / "eval.jsonl");
  const auto first_eval = nlohmann::json::parse(eval_lines.substr(0, eval_lines.find('\n')));
  const std::string clip_id = first_eval.at("clip_id").get<std::string>();
  const auto g1 = run({"generate", "--ckpt", ckpt, "--clip-id", clip_id, "--strategy", "beam", "--beam-width", "3"});
  REQUIRE_MESSAGE(g1.code == 0, g1.err);
  CHECK(g1.out == run({"generate", "--ckpt", ckpt, "--clip-id", clip_id, "--strategy", "beam", "--beam-width", "3"}).out);
  CHECK(run({"generate", "--ckpt", ckpt, "--clip-id", "no#such", "--strategy", "greedy"}).code == 1);
  CHECK(run({"generate", "--ckpt", ckpt, "--clip-id", clip_id, "--max-len", "99"}).code == 1);

  // Train with T1 >= T2 is a configuration error.
  const auto bad = run({"train", "--corpus", corpus, "--out", (dir / "bad.ckpt").string(), "--set", "T1=30"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("T1") != std::string::npos);
  CHECK(run({"train", "--corpus", corpus, "--out", (dir / "bad.ckpt").string(), "--set", "shape=1"}).code == 1);
  CHECK_FALSE(fs::exists(dir / "bad.ckpt"));

  // A checkpoint paired with a different vocabulary is rejected.
  REQUIRE(run({"build-vocab", "--corpus", corpus, "--max-size", "8"}).code == 0);
  CHECK(run({"evaluate", "--corpus", corpus, "--ckpt", ckpt, "--strategy", "random"}).code == 1);

  // Preprocessing the raw streams the generator wrote.
  const auto pre_out = (dir / "pre").string();
  const auto pp = run({"preprocess", "--in", (fs::path(corpus) / "streams.jsonl").string(), "--window", "1800",
                       "--clip-len", "30", "--context", "20", "--out", pre_out, "--eval-streams", "2"});
  REQUIRE_MESSAGE(pp.code == 0, pp.err);
  const auto processed = data::read_corpus(pre_out);
  CHECK(processed.manifest.d_frame == 8);
  CHECK_FALSE(processed.train.empty());
  CHECK_FALSE(processed.eval.empty());
  CHECK(run({"preprocess", "--in", (fs::path(corpus) / "streams.jsonl").string(), "--out", pre_out, "--context",
             "30", "--clip-len", "30"})
            .code == 1);
}
