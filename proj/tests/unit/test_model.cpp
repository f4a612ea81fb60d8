#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "livechat/common/errors.hpp"
#include "livechat/model/model.hpp"
#include "livechat/tensor/tape.hpp"
#include "support/fixtures.hpp"

using namespace livechat;
using namespace livechat::model;
using tensor::TokenId;

namespace {

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  REQUIRE(a.shape() == b.shape());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

struct MicroSetup {
  ModelConfig config = testing::micro_config();
  data::Vocabulary vocab = testing::micro_vocab();
  ModelParams<double> params = ModelParams<double>::init(config, vocab.size(), 7, 0.3);
  ClipInputs<double> inputs = make_clip_inputs<double>(testing::micro_clip(), vocab, config, config.context_comments);
};

Tensor<double> random_frames(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.normal();
  return Tensor<double>({rows, cols}, v);
}

}  // namespace

TEST_CASE("configuration validation") {
  ModelConfig c = testing::micro_config();
  CHECK_NOTHROW(c.validate());
  c.context_s = c.clip_s;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = testing::micro_config();
  c.d_model = 9;
  c.n_heads = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = testing::micro_config();
  c.context_comments = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const ModelConfig defaults;
  CHECK(defaults.d_model == 256);
  CHECK(defaults.encoder_layers == 4);
  CHECK(defaults.decoder_layers == 4);
  CHECK(defaults.dropout == 0.1);
  CHECK(defaults.context_comments == 5);
  CHECK(config_from_json(config_to_json(testing::desk_config())).d_model == 64);
}

TEST_CASE("parameter shapes follow the configuration") {
  for (const auto& config : {testing::micro_config(), testing::desk_config()}) {
    const auto params = ModelParams<float>::init(config, 37, 1);
    CHECK(params.parameter_count() == expected_parameter_count(config, 37));
    CHECK(params.token_embedding.shape() == tensor::Shape{37, config.d_model});
    CHECK(params.output_w.shape() == tensor::Shape{config.d_model, 37});
    CHECK(params.frame_proj_w.shape() == tensor::Shape{config.d_frame, config.d_model});
    CHECK(params.decoder_layers.size() == config.decoder_layers);
    CHECK(params.video_encoder.layers.size() == config.encoder_layers);
    for (const auto& p : params.named()) {
      for (float v : p.tensor.data()) REQUIRE(std::isfinite(v));
    }
  }
  CHECK(is_text_encoder_param("audio_encoder.layers.0.attn.wq"));
  CHECK(is_text_encoder_param("token_embedding"));
  CHECK_FALSE(is_text_encoder_param("video_encoder.layers.0.attn.wq"));
  CHECK_FALSE(is_text_encoder_param("output.w"));
}

TEST_CASE("frame_tokens and decoder_pair layouts") {
  const std::vector<TokenId> words{5, 6, 7, 8};
  std::vector<std::uint8_t> valid;
  CHECK(frame_tokens(words, 8, &valid) == std::vector<TokenId>{2, 5, 6, 7, 8, 3, 0, 0});
  CHECK(valid == std::vector<std::uint8_t>{1, 1, 1, 1, 1, 1, 0, 0});
  CHECK(frame_tokens(words, 4) == std::vector<TokenId>{2, 5, 6, 3});
  CHECK(frame_tokens({}, 3) == std::vector<TokenId>{2, 3, 0});
  CHECK_THROWS_AS(frame_tokens(words, 1), ConfigError);

  const auto pair = decoder_pair(words, 3);
  CHECK(pair.input == std::vector<TokenId>{2, 5, 6});
  CHECK(pair.labels == std::vector<TokenId>{5, 6, 3});
}

TEST_CASE("make_clip_inputs lays out the clip") {
  const MicroSetup s;
  CHECK(s.inputs.frames.shape() == tensor::Shape{3, 4});
  CHECK(s.inputs.audio_ids == std::vector<TokenId>{2, 5, 6, 7, 3, 0});
  CHECK(s.inputs.comment_ids == std::vector<TokenId>{2, 8, 9, 3, 2, 10, 3, 0});
  CHECK(s.inputs.slot_valid == std::vector<std::uint8_t>{1, 1});

  // One real comment and three slots: two leading masked sentinels.
  auto clip = testing::micro_clip();
  clip.context_comments.pop_back();
  const auto three = make_clip_inputs<double>(clip, s.vocab, s.config, 3);
  CHECK(three.slot_valid == std::vector<std::uint8_t>{0, 0, 1});
  // No comment at all: the last sentinel stays visible.
  clip.context_comments.clear();
  const auto none = make_clip_inputs<double>(clip, s.vocab, s.config, 3);
  CHECK(none.slot_valid == std::vector<std::uint8_t>{0, 0, 1});
}

TEST_CASE("encode_video shapes and sensitivity") {
  ModelConfig config = testing::micro_config();
  config.d_model = 256;
  config.n_heads = 4;
  config.d_ff = 64;
  config.d_frame = 64;
  config.context_s = 20;
  config.clip_s = 30;
  const auto params = ModelParams<double>::init(config, 20, 3, 0.1);
  const auto frames = random_frames(20, 64, 4);
  const auto out = encode_video(frames, params, ForwardMode::eval());
  CHECK(out.states.shape() == tensor::Shape{20, 256});

  // Swapping two frames changes the output.
  auto swapped_values = std::vector<double>(frames.data().begin(), frames.data().end());
  std::swap_ranges(swapped_values.begin(), swapped_values.begin() + 64, swapped_values.begin() + 64);
  const auto swapped = encode_video(Tensor<double>({20, 64}, swapped_values), params, ForwardMode::eval());
  CHECK(max_abs_diff(out.states, swapped.states) > 1e-6);

  const auto zero_params = ModelParams<double>::zeros(config, 20);
  const auto zero_out = encode_video(Tensor<double>::zeros({20, 64}), zero_params, ForwardMode::eval());
  for (double v : zero_out.states.data()) REQUIRE(std::isfinite(v));
}

TEST_CASE("encode_audio shapes and padding invariance") {
  ModelConfig config = testing::micro_config();
  config.audio_tokens = 64;
  const auto vocab = testing::micro_vocab();
  const auto params = ModelParams<double>::init(config, vocab.size(), 5, 0.3);

  std::vector<std::uint8_t> valid;
  const auto empty = frame_tokens({}, 64, &valid);
  CHECK(empty[0] == data::kBos);
  CHECK(empty[1] == data::kEos);
  CHECK(empty[2] == data::kPad);
  CHECK(encode_audio(empty, valid, params, ForwardMode::eval()).states.shape() == tensor::Shape{64, 8});

  const std::vector<TokenId> words{5, 6, 7};
  auto ids = frame_tokens(words, 64, &valid);
  const auto base = encode_audio(ids, valid, params, ForwardMode::eval());
  for (std::size_t i = 5; i < 64; ++i) ids[i] = static_cast<TokenId>(5 + i % 8);
  const auto perturbed = encode_audio(ids, valid, params, ForwardMode::eval());
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(base.states.at(r, c) - perturbed.states.at(r, c)) <= 1e-12);
  }
}

TEST_CASE("encode_comments pools per slot") {
  ModelConfig config = testing::micro_config();
  config.context_comments = 5;
  const auto vocab = testing::micro_vocab();
  const auto params = ModelParams<double>::init(config, vocab.size(), 5, 0.3);
  auto clip = testing::micro_clip();
  clip.context_comments = {data::make_comment(0.1, "a b"), data::make_comment(0.2, "c"),
                           data::make_comment(0.3, "a b"), data::make_comment(0.4, "d e f"),
                           data::make_comment(0.5, "g")};
  const auto inputs = make_clip_inputs<double>(clip, vocab, config, 5);
  const auto enc = encode_comments(inputs.comment_ids, inputs.comment_valid, inputs.slot_valid, params,
                                   ForwardMode::eval());
  CHECK(enc.states.shape() == tensor::Shape{5, 8});
  for (std::size_t c = 0; c < 8; ++c) CHECK(enc.states.at(0, c) == enc.states.at(2, c));
  double differ = 0.0;
  for (std::size_t c = 0; c < 8; ++c) differ += std::abs(enc.states.at(0, c) - enc.states.at(1, c));
  CHECK(differ > 1e-6);
}

TEST_CASE("multi_head_attention with one key returns the value path") {
  const MicroSetup s;
  const auto& attn = s.params.decoder_layers[0].video_attn;
  const auto queries = random_frames(3, 8, 1);
  const auto key = random_frames(1, 8, 2);
  const auto out = multi_head_attention(queries, key, AttentionMask{}, attn, 1);
  const auto expected = tensor::linear(tensor::linear(key, attn.wv, attn.bv), attn.wo, attn.bo);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 8; ++c) CHECK(out.at(r, c) == doctest::Approx(expected.at(0, c)).epsilon(1e-12));
  }
}

TEST_CASE("decoder_forward shape, causality and live cross-attention") {
  const MicroSetup s;
  const auto ctx = encode_context(s.inputs, s.params, ForwardMode::eval());
  const std::vector<TokenId> input{2, 5, 6, 7, 8};
  const auto logits = decoder_forward<double>(input, ctx, s.params, ForwardMode::eval());
  CHECK(logits.shape() == tensor::Shape{5, s.vocab.size()});

  auto changed = input;
  changed[3] = 11;
  const auto logits2 = decoder_forward<double>(changed, ctx, s.params, ForwardMode::eval());
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < s.vocab.size(); ++c) CHECK(std::abs(logits.at(r, c) - logits2.at(r, c)) <= 1e-12);
  }
  double later = 0.0;
  for (std::size_t c = 0; c < s.vocab.size(); ++c) later += std::abs(logits.at(3, c) - logits2.at(3, c));
  CHECK(later > 1e-9);

  auto no_video = ctx;
  no_video.video.states = Tensor<double>::zeros(ctx.video.states.shape());
  CHECK(max_abs_diff(decoder_forward<double>(input, no_video, s.params, ForwardMode::eval()), logits) > 1e-9);

  const std::vector<TokenId> too_long{2, 5, 6, 7, 8, 9};
  CHECK_THROWS_AS(decoder_forward<double>(too_long, ctx, s.params, ForwardMode::eval()), ShapeError);
}

TEST_CASE("score_candidate") {
  const MicroSetup s;
  const auto ctx = encode_context(s.inputs, s.params, ForwardMode::eval());
  const std::vector<TokenId> candidate{11, 12, 5};
  CHECK(score_candidate(candidate, ctx, s.params) == score_candidate(candidate, ctx, s.params));

  const auto zeros = ModelParams<double>::zeros(s.config, s.vocab.size());
  const auto zctx = encode_context(s.inputs, zeros, ForwardMode::eval());
  CHECK(score_candidate(candidate, zctx, zeros) ==
        doctest::Approx(-std::log(static_cast<double>(s.vocab.size()))).epsilon(1e-12));
}

TEST_CASE("generate_comment") {
  const MicroSetup s;
  const auto ctx = encode_context(s.inputs, s.params, ForwardMode::eval());
  GenerateOptions greedy;
  GenerateOptions beam1{DecodeStrategy::kBeam, 1, 0};
  CHECK(generate_comment(ctx, s.params, greedy) == generate_comment(ctx, s.params, beam1));
  for (std::size_t width : {1, 2, 4}) {
    for (std::size_t max_len : {1, 3, 5}) {
      const auto out = generate_comment(ctx, s.params, GenerateOptions{DecodeStrategy::kBeam, width, max_len});
      CHECK(out.size() <= max_len);
      for (TokenId t : out) {
        CHECK(t != data::kPad);
        CHECK(t != data::kBos);
        CHECK(t != data::kMask);
        CHECK(t != data::kEos);
      }
    }
  }
  CHECK_THROWS_AS(generate_comment(ctx, s.params, GenerateOptions{DecodeStrategy::kGreedy, 1, 6}), ConfigError);
}

TEST_CASE("training mode applies dropout only with a generator") {
  ModelConfig config = testing::micro_config();
  config.dropout = 0.5;
  const auto vocab = testing::micro_vocab();
  const auto params = ModelParams<double>::init(config, vocab.size(), 7, 0.3);
  const auto inputs = make_clip_inputs<double>(testing::micro_clip(), vocab, config, 2);
  const auto a = encode_context(inputs, params, ForwardMode::eval());
  const auto b = encode_context(inputs, params, ForwardMode::eval());
  CHECK(max_abs_diff(a.video.states, b.video.states) == 0.0);
  Rng rng(3);
  const auto c = encode_context(inputs, params, ForwardMode::train(rng));
  CHECK(max_abs_diff(a.video.states, c.video.states) > 0.0);
  CHECK_THROWS(encode_context(inputs, params, ForwardMode{true, nullptr}));
}
