#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "livechat/common/errors.hpp"
#include "livechat/tensor/tape.hpp"
#include "livechat/train/checkpoint.hpp"
#include "livechat/train/optimizer.hpp"
#include "livechat/train/trainer.hpp"
#include "support/fixtures.hpp"

using namespace livechat;
using namespace livechat::train;
using model::ModelParams;
using tensor::TokenId;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "livechat_test_train" / name;
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

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

bool same_values(const ModelParams<float>& a, const ModelParams<float>& b, bool (*select)(const std::string&)) {
  const auto na = a.named(), nb = b.named();
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (!select(na[i].name)) continue;
    const auto x = na[i].tensor.data(), y = nb[i].tensor.data();
    if (!std::equal(x.begin(), x.end(), y.begin())) return false;
  }
  return true;
}

bool all_params(const std::string&) { return true; }
bool non_text(const std::string& name) { return !model::is_text_encoder_param(name); }

// Small model on a 20-clip synthetic corpus.
struct SmallSetup {
  data::SyntheticCorpus synth = data::synthesize_corpus(testing::synth_params(2, 10, 0, 2, 3));
  data::Vocabulary vocab = data::build_vocabulary(data::text_sequences(synth.corpus.train), 1, 100000);
  model::ModelConfig config = [] {
    auto c = testing::desk_config();
    c.d_model = 16;
    c.d_ff = 32;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.n_heads = 2;
    return c;
  }();
  std::vector<PreparedClip<float>> clips =
      prepare_clips<float>(synth.corpus.train, vocab, config, config.context_comments);

  TrainConfig train_config(std::size_t pretrain, std::size_t train) const {
    TrainConfig t = testing::desk_train_config(4);
    t.batch_size = 4;
    t.epochs_pretrain = pretrain;
    t.epochs_train = train;
    return t;
  }
};

}  // namespace

TEST_CASE("TrainConfig validation and defaults") {
  const TrainConfig defaults;
  CHECK(defaults.lr == 1e-4);
  CHECK(defaults.batch_size == 32);
  CHECK(defaults.epochs_pretrain == 100);
  CHECK(defaults.epochs_train == 200);
  TrainConfig t;
  t.p_mask = 1.5;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.lr = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("mask_for_mlm examples") {
  const std::vector<TokenId> ids{2, 5, 6, 7, 3, 0, 0, 2, 8, 4, 3};
  Rng rng(1);
  const auto none = mask_for_mlm(ids, 0.0, rng);
  CHECK(none.ids == ids);
  CHECK(none.n_masked == 0);
  for (TokenId l : none.labels) CHECK(l == tensor::kIgnoreId);

  const auto all = mask_for_mlm(ids, 1.0, rng);
  CHECK(all.n_masked == 4);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const bool ordinary = ids[i] >= static_cast<TokenId>(data::kReservedCount) || ids[i] == data::kUnk;
    CHECK(all.ids[i] == (ordinary ? data::kMask : ids[i]));
    CHECK(all.labels[i] == (ordinary ? ids[i] : tensor::kIgnoreId));
  }

  std::vector<TokenId> many(10000, 9);
  const auto some = mask_for_mlm(many, 0.15, rng);
  const double sigma = std::sqrt(10000 * 0.15 * 0.85);
  CHECK(std::abs(static_cast<double>(some.n_masked) - 1500.0) <= 3 * sigma);
}

TEST_CASE("select_target examples") {
  Rng rng(3);
  const std::vector<data::CommentRecord> one{data::make_comment(22, "only")};
  CHECK(select_target(one, false, rng).raw_text == "only");
  CHECK(select_target(one, true, rng).raw_text == "only");

  const std::vector<data::CommentRecord> two{data::make_comment(25, "later"), data::make_comment(21, "earlier")};
  CHECK(select_target(two, false, rng).raw_text == "earlier");

  const std::vector<data::CommentRecord> three{data::make_comment(21, "a"), data::make_comment(22, "b"),
                                               data::make_comment(23, "c")};
  std::size_t counts[3] = {0, 0, 0};
  for (int i = 0; i < 300; ++i) ++counts[select_target_index(three, true, rng)];
  const double sigma = std::sqrt(300 * (1.0 / 3) * (2.0 / 3));
  for (std::size_t c : counts) {
    CHECK(c >= 1);
    CHECK(std::abs(static_cast<double>(c) - 100.0) <= 3 * sigma);
  }
}

TEST_CASE("Adam minimizes a quadratic and clipping bounds the norm") {
  const tensor::Tensor<double> x({3}, {0.0, -2.0, 10.0}, true);
  const tensor::Tensor<double> target({3}, {3.0, 3.0, 3.0});
  std::vector<model::NamedTensor<double>> params{{"x", x}};
  Adam<double> adam(params, 0.1);
  for (int step = 0; step < 1000; ++step) {
    adam.zero_grad();
    tensor::Tape<double> tape;
    tensor::TapeScope<double> scope(tape);
    const auto d = tensor::add(x, tensor::scale(target, -1.0));
    auto loss = tensor::sum(tensor::mul(d, d));
    tape.backward(loss);
    adam.step();
  }
  for (double v : x.data()) CHECK(v == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(adam.steps() == 1000);

  x.drop_grad();
  auto g = x.mutable_grad();
  g[0] = 3.0;
  g[1] = 4.0;
  g[2] = 0.0;
  CHECK(global_grad_norm(params) == doctest::Approx(5.0));
  CHECK(clip_gradients(params, 1.0) == doctest::Approx(5.0));
  CHECK(global_grad_norm(params) <= 1.0 + 1e-12);
  CHECK(x.grad()[0] == doctest::Approx(0.6));
  CHECK(clip_gradients(params, 10.0) == doctest::Approx(1.0));
  CHECK(x.grad()[1] == doctest::Approx(0.8));
}

TEST_CASE("pretraining lowers the masked loss and touches only the text encoders") {
  const SmallSetup s;
  auto params = ModelParams<float>::init(s.config, s.vocab.size(), 2);
  const auto before = params.clone();
  const auto logs = pretrain_mlm(params, s.clips, s.train_config(10, 0));
  REQUIRE(logs.size() == 10);
  const double ln_v = std::log(static_cast<double>(s.vocab.size()));
  CHECK(std::abs(logs.front().mean_loss - ln_v) <= 0.05 * ln_v);
  CHECK(logs.back().mean_loss < logs.front().mean_loss);
  CHECK(same_values(before, params, non_text));
  CHECK_FALSE(same_values(before, params, all_params));

  auto t = s.train_config(1, 0);
  t.p_mask = 0.0;
  CHECK_THROWS_AS(pretrain_mlm(params, s.clips, t), ConfigError);
}

TEST_CASE("training starts near ln V, is deterministic and reduces loss") {
  const SmallSetup s;
  const auto init = ModelParams<float>::init(s.config, s.vocab.size(), 2);
  double first = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& clip = s.clips[i];
    first += response_loss(init, clip.inputs, clip.response_ids[0], model::ForwardMode::eval()).data()[0] / 4.0;
  }
  const double ln_v = std::log(static_cast<double>(s.vocab.size()));
  CHECK(std::abs(first - ln_v) <= 0.1 * ln_v);

  auto a = init.clone(), b = init.clone();
  const auto la = train_model(a, s.clips, s.train_config(0, 2));
  const auto lb = train_model(b, s.clips, s.train_config(0, 2));
  CHECK(same_values(a, b, all_params));
  CHECK(la.back().mean_loss == lb.back().mean_loss);
  CHECK(la.back().mean_loss < la.front().mean_loss);

  auto c = init.clone();
  auto other = s.train_config(0, 2);
  other.seed = 99;
  train_model(c, s.clips, other);
  CHECK_FALSE(same_values(a, c, all_params));
}

TEST_CASE("gradient clipping during training keeps parameters finite") {
  const SmallSetup s;
  auto params = ModelParams<float>::init(s.config, s.vocab.size(), 2);
  auto t = s.train_config(0, 1);
  t.grad_clip = 1e-3;
  t.lr = 1.0;
  train_model(params, s.clips, t);
  for (const auto& p : params.named()) {
    for (float v : p.tensor.data()) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("checkpoint round trip and error kinds") {
  const auto config = testing::micro_config();
  const auto vocab = testing::micro_vocab();
  const auto params = ModelParams<float>::init(config, vocab.size(), 5);
  const auto dir = scratch("ckpt");
  const nlohmann::json meta = {{"note", "unit"}};
  save_checkpoint(params, vocab.hash(), dir / "a.ckpt", meta);
  const auto loaded = load_checkpoint(dir / "a.ckpt", vocab.hash());
  CHECK(loaded.vocab_hash == vocab.hash());
  CHECK(loaded.metadata == meta);
  CHECK(same_values(params, loaded.params, all_params));
  save_checkpoint(loaded.params, loaded.vocab_hash, dir / "b.ckpt", loaded.metadata);
  const std::string bytes = slurp(dir / "a.ckpt");
  CHECK(bytes == slurp(dir / "b.ckpt"));

  const auto kind_of = [](const fs::path& p, std::optional<std::uint64_t> hash = std::nullopt) {
    try {
      load_checkpoint(p, hash);
    } catch (const CheckpointError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  CHECK(kind_of(dir / "a.ckpt", vocab.hash() + 1) == static_cast<int>(CheckpointError::Kind::kVocabMismatch));
  CHECK(kind_of(dir / "missing.ckpt") == static_cast<int>(CheckpointError::Kind::kFormat));

  spit(dir / "magic.ckpt", "NOTACKPT" + bytes.substr(8));
  CHECK(kind_of(dir / "magic.ckpt") == static_cast<int>(CheckpointError::Kind::kFormat));
  spit(dir / "short.ckpt", bytes.substr(0, bytes.size() - 10));
  CHECK(kind_of(dir / "short.ckpt") == static_cast<int>(CheckpointError::Kind::kTruncated));

  // Rewrite the header with one tensor's shape edited.
  std::uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i) header_len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  auto header = nlohmann::json::parse(bytes.substr(16, header_len));
  header["tensors"][0]["shape"] = {static_cast<std::size_t>(vocab.size()) + 1, config.d_model};
  const std::string edited = header.dump();
  std::string len_bytes(8, '\0');
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((edited.size() >> (8 * i)) & 0xff);
  spit(dir / "shape.ckpt", bytes.substr(0, 8) + len_bytes + edited + bytes.substr(16 + header_len));
  CHECK(kind_of(dir / "shape.ckpt") == static_cast<int>(CheckpointError::Kind::kShapeMismatch));
}
