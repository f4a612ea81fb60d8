#include "livechat/cli/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "livechat/cli/run_config.hpp"
#include "livechat/common/errors.hpp"
#include "livechat/data/corpus.hpp"
#include "livechat/data/stats.hpp"
#include "livechat/data/synth.hpp"
#include "livechat/data/tokenizer.hpp"
#include "livechat/data/vocabulary.hpp"
#include "livechat/eval/harness.hpp"
#include "livechat/model/model.hpp"
#include "livechat/train/checkpoint.hpp"
#include "livechat/train/trainer.hpp"

namespace livechat::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

data::Vocabulary load_vocab(const std::string& vocab_path, const fs::path& corpus_dir) {
  const fs::path path = vocab_path.empty() ? corpus_dir / data::kVocabFile : fs::path(vocab_path);
  if (!fs::exists(path)) throw std::runtime_error("no vocabulary at " + path.string() + " (run build-vocab)");
  return data::Vocabulary::load(path);
}

// Settings recorded in a checkpoint by pretrain/train, when present.
json stored_run_config(const train::Checkpoint& ckpt) {
  if (ckpt.metadata.contains("run_config") && ckpt.metadata["run_config"].is_object()) {
    return ckpt.metadata["run_config"];
  }
  return json::object();
}

const data::ClipExample& find_clip(const data::Corpus& corpus, const std::string& clip_id) {
  for (const auto* split : {&corpus.train, &corpus.eval}) {
    for (const auto& clip : *split) {
      if (clip.clip_id == clip_id) return clip;
    }
  }
  throw std::runtime_error("no clip '" + clip_id + "' in the corpus");
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  data::SynthParams params;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  a.params.validate();
  const auto synth = data::synthesize_corpus(a.params);
  data::write_corpus(a.out, synth.corpus);
  data::write_raw_streams(fs::path(a.out) / "streams.jsonl", synth.streams);
  out << "wrote " << synth.corpus.train.size() << " train and " << synth.corpus.eval.size() << " eval clips to "
      << a.out << '\n';
  return 0;
}

// ---- preprocess ----

struct PreprocessArgs {
  std::string in;
  std::string out;
  double window = 1800.0;
  std::size_t clip_len = 30;
  std::size_t context = 20;
  std::size_t eval_streams = 0;
};

int run_preprocess(const PreprocessArgs& a, std::ostream& out) {
  if (!(a.window > 0.0)) throw ConfigError("--window must be positive");
  auto streams = data::read_raw_streams(a.in);
  if (a.eval_streams > streams.size()) throw ConfigError("--eval-streams exceeds the number of streams");
  std::size_t d_frame = 0;
  for (const auto& s : streams) {
    if (!s.frames.empty()) {
      d_frame = s.frames.front().size();
      break;
    }
  }
  if (d_frame == 0) throw FormatError("no stream in " + a.in + " has frame features");
  const data::ClipTiming timing{a.context, a.clip_len, d_frame};
  timing.validate();

  data::Corpus corpus;
  corpus.manifest.d_frame = d_frame;
  corpus.manifest.context_s = a.context;
  corpus.manifest.clip_s = a.clip_len;
  const std::size_t first_eval = streams.size() - a.eval_streams;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    auto& stream = streams[i];
    std::stable_sort(stream.comments.begin(), stream.comments.end(),
                     [](const data::CommentRecord& x, const data::CommentRecord& y) { return x.t < y.t; });
    if (stream.comments.empty()) {
      ++skipped;
      continue;
    }
    std::vector<double> times;
    times.reserve(stream.comments.size());
    for (const auto& c : stream.comments) times.push_back(c.t);
    const auto window = data::densest_window(times, a.window);
    const auto cropped = data::crop_stream(stream, window.start, a.window);
    auto clips = data::slice_clips(cropped, timing);
    if (clips.empty()) {
      ++skipped;
      continue;
    }
    auto& split = i < first_eval ? corpus.train : corpus.eval;
    for (auto& clip : clips) split.push_back(std::move(clip));
  }
  if (corpus.train.empty()) throw std::runtime_error("preprocessing produced no training clips");
  data::write_corpus(a.out, corpus);
  out << "wrote " << corpus.train.size() << " train and " << corpus.eval.size() << " eval clips to " << a.out
      << " (" << skipped << " streams skipped)\n";
  return 0;
}

// ---- build-vocab ----

struct VocabArgs {
  std::string corpus;
  std::uint64_t min_freq = 1;
  std::size_t max_size = 50000;
  std::string out;
};

int run_build_vocab(const VocabArgs& a, std::ostream& out) {
  if (a.max_size <= data::kReservedCount) throw ConfigError("--max-size must exceed the 5 reserved tokens");
  const auto corpus = data::read_corpus(a.corpus);
  const auto vocab = data::build_vocabulary(data::text_sequences(corpus.train), a.min_freq, a.max_size);
  const fs::path path = a.out.empty() ? fs::path(a.corpus) / data::kVocabFile : fs::path(a.out);
  vocab.save(path);
  out << "vocabulary of " << vocab.size() << " tokens written to " << path.string() << '\n';
  return 0;
}

// ---- pretrain / train ----

struct TrainArgs {
  std::string corpus;
  std::string config;
  std::string out;
  std::string init;
  std::string log;
  std::vector<std::string> sets;
  bool augment = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_training(const TrainArgs& a, bool pretraining, std::ostream& out) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  apply_overrides(cfg, a.sets);
  if (!a.corpus.empty()) cfg.corpus = a.corpus;
  if (!a.out.empty()) cfg.checkpoint = a.out;
  if (a.augment) cfg.train.augmentation = true;
  if (a.seed_given) cfg.train.seed = a.seed;
  if (cfg.corpus.empty()) throw ConfigError("no corpus: pass --corpus or set \"corpus\"");
  if (cfg.checkpoint.empty()) throw ConfigError("no output checkpoint: pass --out or set \"checkpoint\"");

  const auto corpus = data::read_corpus(cfg.corpus);
  const model::ModelConfig mcfg = cfg.model_for_corpus(corpus.manifest.d_frame);
  if (mcfg.context_s != corpus.manifest.context_s || mcfg.clip_s != corpus.manifest.clip_s) {
    throw ConfigError("config T1/T2 do not match the corpus (" + std::to_string(corpus.manifest.context_s) + "/" +
                      std::to_string(corpus.manifest.clip_s) + ")");
  }
  const auto vocab = load_vocab(cfg.vocab, cfg.corpus);

  json stages = json::array();
  model::ModelParams<float> params;
  if (!a.init.empty()) {
    auto ckpt = train::load_checkpoint(a.init, vocab.hash());
    if (model::config_to_json(ckpt.params.config) != model::config_to_json(mcfg)) {
      throw ConfigError("--init checkpoint was built with a different model configuration");
    }
    params = std::move(ckpt.params);
    if (ckpt.metadata.contains("stages")) stages = ckpt.metadata["stages"];
  } else {
    params = model::ModelParams<float>::init(mcfg, vocab.size(), cfg.train.seed, cfg.init_std);
  }

  const auto clips = train::prepare_clips<float>(corpus.train, vocab, mcfg, mcfg.context_comments);
  std::unique_ptr<std::ofstream> log;
  fs::path log_path = a.log;
  if (log_path.empty() && !cfg.out_dir.empty()) {
    log_path = fs::path(cfg.out_dir) / (pretraining ? "pretrain_log.jsonl" : "train_log.jsonl");
  }
  if (!log_path.empty()) {
    if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
    log = std::make_unique<std::ofstream>(log_path, std::ios::binary);
    if (!*log) throw std::runtime_error("cannot write log " + log_path.string());
  }
  const auto on_epoch = [&](const train::EpochLog& e) {
    const std::string line = train::epoch_log_to_json(e).dump();
    out << line << '\n';
    if (log) *log << line << '\n' << std::flush;
  };
  const auto logs = pretraining ? train::pretrain_mlm(params, clips, cfg.train, on_epoch)
                                : train::train_model(params, clips, cfg.train, on_epoch);

  json stage = {{"stage", pretraining ? "pretrain" : "train"}, {"epochs", logs.size()}};
  if (!logs.empty()) stage["final_loss"] = logs.back().mean_loss;
  stages.push_back(stage);
  const json metadata = {{"run_config", run_config_to_json(cfg)}, {"stages", stages}};
  const fs::path ckpt_path = cfg.checkpoint;
  if (ckpt_path.has_parent_path()) fs::create_directories(ckpt_path.parent_path());
  train::save_checkpoint(params, vocab.hash(), ckpt_path, metadata);
  out << "checkpoint written to " << ckpt_path.string() << '\n';
  return 0;
}

// ---- evaluate ----

struct EvalArgs {
  std::string corpus;
  std::string ckpt;
  std::string vocab;
  std::string strategy = "random";
  std::size_t candidates = 10;
  std::uint64_t seed = 0;
  std::size_t context = 0;
  std::string out;
};

int run_evaluate(const EvalArgs& a, std::ostream& out) {
  const auto strategy = eval::parse_strategy(a.strategy);
  const auto corpus = data::read_corpus(a.corpus);
  if (corpus.eval.empty()) throw std::runtime_error("corpus " + a.corpus + " has no eval split");
  const auto vocab = load_vocab(a.vocab, a.corpus);
  const auto ckpt = train::load_checkpoint(a.ckpt, vocab.hash());
  const json stored = stored_run_config(ckpt);

  eval::EvalOptions options;
  options.strategy = strategy;
  options.seed = a.seed;
  options.n_candidates = a.candidates;
  options.n_context = a.context != 0 ? a.context : stored.value("context_comments_eval", std::size_t{15});
  options.augmentation = stored.value("augmentation", false);
  const auto result = eval::evaluate(ckpt.params, vocab, corpus.train, corpus.eval, options);

  const std::string report = eval::eval_result_to_json(result).dump(2) + "\n";
  if (!a.out.empty()) write_text(a.out, report);
  out << eval::report_to_json(result.report).dump() << '\n';
  return 0;
}

// ---- stats ----

struct StatsArgs {
  std::string corpus;
  std::string out;
};

int run_stats(const StatsArgs& a, std::ostream& out) {
  const auto corpus = data::read_corpus(a.corpus);
  std::vector<data::ClipExample> all = corpus.train;
  all.insert(all.end(), corpus.eval.begin(), corpus.eval.end());
  const std::string text = data::stats_to_json(data::corpus_stats(all, corpus.manifest.clip_s)).dump(2) + "\n";
  if (!a.out.empty()) write_text(a.out, text);
  out << text;
  return 0;
}

// ---- generate ----

struct GenerateArgs {
  std::string ckpt;
  std::string corpus;
  std::string vocab;
  std::string clip_id;
  std::string strategy = "greedy";
  std::size_t beam_width = 4;
  std::size_t max_len = 0;
  std::size_t context = 0;
};

int run_generate(const GenerateArgs& a, std::ostream& out) {
  model::GenerateOptions options;
  if (a.strategy == "greedy") {
    options.strategy = model::DecodeStrategy::kGreedy;
  } else if (a.strategy == "beam") {
    options.strategy = model::DecodeStrategy::kBeam;
  } else {
    throw ConfigError("unknown decoding strategy '" + a.strategy + "'");
  }
  options.beam_width = a.beam_width;
  options.max_len = a.max_len;

  // The corpus defaults to the one the checkpoint was trained on.
  const auto peek = train::load_checkpoint(a.ckpt);
  const json stored = stored_run_config(peek);
  const std::string corpus_dir = !a.corpus.empty() ? a.corpus : stored.value("corpus", std::string{});
  if (corpus_dir.empty()) throw ConfigError("no corpus: pass --corpus");
  const auto corpus = data::read_corpus(corpus_dir);
  const auto vocab = load_vocab(a.vocab, corpus_dir);
  if (vocab.hash() != peek.vocab_hash) {
    throw train::CheckpointError(train::CheckpointError::Kind::kVocabMismatch,
                                 "checkpoint was trained with a different vocabulary");
  }
  const auto& clip = find_clip(corpus, a.clip_id);
  const std::size_t n_context = a.context != 0 ? a.context : stored.value("context_comments_eval", std::size_t{15});
  const auto inputs = model::make_clip_inputs<float>(clip, vocab, peek.params.config, n_context);
  const auto ctx = model::encode_context(inputs, peek.params, model::ForwardMode::eval());
  const auto ids = model::generate_comment(ctx, peek.params, options);
  out << data::join_tokens(vocab.decode(ids)) << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Live-comment generation: data preparation, training, evaluation and generation", "livechat"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* sc_synth = app.add_subcommand("synth", "Write a synthetic corpus with planted topic signal");
  sc_synth->add_option("--out", synth.out, "Output corpus directory")->required();
  sc_synth->add_option("--streams", synth.params.n_streams, "Training streams")->required();
  sc_synth->add_option("--clips", synth.params.clips_per_stream, "Clips per stream")->required();
  sc_synth->add_option("--topics", synth.params.n_topics, "Latent topics")->required();
  sc_synth->add_option("--seed", synth.params.seed, "Random seed")->required();
  sc_synth->add_option("--eval-streams", synth.params.eval_streams, "Extra streams for the eval split");
  sc_synth->add_option("--d-frame", synth.params.d_frame, "Frame feature dimension");
  sc_synth->add_option("--vocab-per-topic", synth.params.vocab_per_topic, "Words per topic");
  sc_synth->add_option("--noise", synth.params.noise_sigma, "Frame noise standard deviation");

  PreprocessArgs pre;
  auto* sc_pre = app.add_subcommand("preprocess", "Crop raw streams to their densest chat window and slice clips");
  sc_pre->add_option("--in", pre.in, "Raw stream file (JSON lines)")->required();
  sc_pre->add_option("--out", pre.out, "Output corpus directory")->required();
  sc_pre->add_option("--window", pre.window, "Densest-window length in seconds");
  sc_pre->add_option("--clip-len", pre.clip_len, "Clip length T2 in seconds");
  sc_pre->add_option("--context", pre.context, "Context window T1 in seconds");
  sc_pre->add_option("--eval-streams", pre.eval_streams, "Trailing streams assigned to the eval split");

  VocabArgs voc;
  auto* sc_voc = app.add_subcommand("build-vocab", "Build the vocabulary from the training split");
  sc_voc->add_option("--corpus", voc.corpus, "Corpus directory")->required();
  sc_voc->add_option("--min-freq", voc.min_freq, "Minimum token count");
  sc_voc->add_option("--max-size", voc.max_size, "Maximum vocabulary size including reserved tokens");
  sc_voc->add_option("--out", voc.out, "Vocabulary file (default <corpus>/vocab.tsv)");

  TrainArgs pre_args, train_args;
  const auto add_train_flags = [](CLI::App* sc, TrainArgs& t) {
    sc->add_option("--corpus", t.corpus, "Corpus directory");
    sc->add_option("--config", t.config, "Run configuration file (JSON)");
    sc->add_option("--out", t.out, "Output checkpoint");
    sc->add_option("--init", t.init, "Checkpoint to start from");
    sc->add_option("--log", t.log, "Epoch log file (JSON lines)");
    sc->add_option("--set", t.sets, "Override a configuration key: key=value");
    sc->add_flag("--augment", t.augment, "Train on a uniformly drawn response comment");
    sc->add_option("--seed", t.seed, "Random seed")->each([&t](const std::string&) { t.seed_given = true; });
  };
  auto* sc_pretrain = app.add_subcommand("pretrain", "Masked-language-model pretraining of the text encoders");
  add_train_flags(sc_pretrain, pre_args);
  auto* sc_train = app.add_subcommand("train", "Teacher-forced training on response comments");
  add_train_flags(sc_train, train_args);

  EvalArgs ev;
  auto* sc_eval = app.add_subcommand("evaluate", "Candidate-ranking evaluation on the eval split");
  sc_eval->add_option("--corpus", ev.corpus, "Corpus directory")->required();
  sc_eval->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  sc_eval->add_option("--vocab", ev.vocab, "Vocabulary file (default <corpus>/vocab.tsv)");
  sc_eval->add_option("--strategy", ev.strategy, "Distractor strategy")
      ->check(CLI::IsMember({"cosine", "popularity", "random"}));
  sc_eval->add_option("--candidates", ev.candidates, "Candidates per query");
  sc_eval->add_option("--seed", ev.seed, "Random seed");
  sc_eval->add_option("--context", ev.context, "Context comments per clip (default from checkpoint, else 15)");
  sc_eval->add_option("--out", ev.out, "Report file (JSON)");

  StatsArgs st;
  auto* sc_stats = app.add_subcommand("stats", "Corpus statistics");
  sc_stats->add_option("--corpus", st.corpus, "Corpus directory")->required();
  sc_stats->add_option("--out", st.out, "Also write the statistics to this file");

  GenerateArgs gen;
  auto* sc_gen = app.add_subcommand("generate", "Generate a comment for one clip");
  sc_gen->add_option("--ckpt", gen.ckpt, "Checkpoint")->required();
  sc_gen->add_option("--clip-id", gen.clip_id, "Clip id")->required();
  sc_gen->add_option("--corpus", gen.corpus, "Corpus directory (default: the training corpus)");
  sc_gen->add_option("--vocab", gen.vocab, "Vocabulary file (default <corpus>/vocab.tsv)");
  sc_gen->add_option("--strategy", gen.strategy, "Decoding strategy")->check(CLI::IsMember({"greedy", "beam"}));
  sc_gen->add_option("--beam-width", gen.beam_width, "Beam width")->check(CLI::PositiveNumber);
  sc_gen->add_option("--max-len", gen.max_len, "Maximum generated length (default: response length)");
  sc_gen->add_option("--context", gen.context, "Context comments per clip (default from checkpoint, else 15)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sc_synth->parsed()) return run_synth(synth, out);
    if (sc_pre->parsed()) return run_preprocess(pre, out);
    if (sc_voc->parsed()) return run_build_vocab(voc, out);
    if (sc_pretrain->parsed()) return run_training(pre_args, true, out);
    if (sc_train->parsed()) return run_training(train_args, false, out);
    if (sc_eval->parsed()) return run_evaluate(ev, out);
    if (sc_stats->parsed()) return run_stats(st, out);
    if (sc_gen->parsed()) return run_generate(gen, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace livechat::cli
