#include <gtest/gtest.h>

#include <memory>

#include "svit/encoder.hpp"
#include "svit/kernels.hpp"
#include "svit/weights.hpp"
#include "test_support.hpp"

namespace svit {
namespace {

using testing::random_tensor;

ModelConfig small_config(TaskMode mode = TaskMode::kFrame) {
  ModelConfig c = ModelConfig::desk();
  c.image_h = 16;
  c.image_w = 24;
  c.channels = 8;
  c.heads = 2;
  c.layers = 2;
  c.stages = 2;
  c.window = 2;
  c.memory_capacity = 2;
  c.adaptor_channels = {4, 6, 8, 10};
  c.mode = mode;
  return c;
}

std::vector<Tensor<double>> frames(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
  std::vector<Tensor<double>> out;
  for (std::size_t t = 0; t < n; ++t) out.push_back(random_tensor({3, c.image_h, c.image_w}, seed + t));
  return out;
}

std::shared_ptr<const EncoderWeights<double>> shared(EncoderWeights<double> w) {
  return std::make_shared<const EncoderWeights<double>>(std::move(w));
}

TEST(PatchEmbed, ZeroFrameGivesPositionalEmbedding) {
  const ModelConfig c = small_config();
  auto w = init_encoder_weights<double>(c, 1);
  w.patch_embed.fill(0.0);
  auto grid = patch_embed(random_tensor({3, 16, 24}, 2), w, c);
  EXPECT_EQ(grid.tokens(), w.pos_embed);
}

TEST(PatchEmbed, GridShape) {
  ModelConfig c = small_config();
  c.image_h = c.image_w = 8;
  auto w = init_encoder_weights<double>(c, 1);
  auto grid = patch_embed(random_tensor({3, 8, 8}, 2), w, c);
  EXPECT_EQ(grid.rows(), 2u);
  EXPECT_EQ(grid.cols(), 2u);
  EXPECT_EQ(grid.channels(), 8u);
}

TEST(PatchEmbed, MatchesPerPatchProjection) {
  const ModelConfig c = small_config();
  auto w = init_encoder_weights<double>(c, 3);
  auto frame = random_tensor({3, 16, 24}, 4);
  auto grid = patch_embed(frame, w, c);
  const std::size_t p = c.patch;
  for (std::size_t py = 0; py < c.grid_h(); ++py) {
    for (std::size_t px = 0; px < c.grid_w(); ++px) {
      for (std::size_t ch = 0; ch < c.channels; ++ch) {
        double acc = w.pos_embed.at(py * c.grid_w() + px, ch);
        for (std::size_t k = 0; k < 3; ++k)
          for (std::size_t dy = 0; dy < p; ++dy)
            for (std::size_t dx = 0; dx < p; ++dx)
              acc += frame.at(k, py * p + dy, px * p + dx) *
                     w.patch_embed.at((k * p + dy) * p + dx, ch);
        EXPECT_NEAR(grid.tokens().at(grid.index(py, px), ch), acc, 1e-12);
      }
    }
  }
}

TEST(PatchEmbed, RejectsWrongFrameSize) {
  const ModelConfig c = small_config();
  auto w = init_encoder_weights<double>(c, 1);
  EXPECT_THROW(patch_embed(Tensor<double>({3, 16, 16}), w, c), DimensionError);
}

TEST(TransformerLayer, ZeroWeightsPassThrough) {
  const ModelConfig c = small_config(TaskMode::kSequence);
  auto w = init_encoder_weights<double>(c, 5);
  for (auto& layer : w.layers) {
    layer.attention.w_o.fill(0.0);
    layer.attention.alpha_xt.fill(0.0);
    layer.attention.alpha_ty.fill(0.0);
    layer.mlp.w2.fill(0.0);
    layer.mlp.b2.fill(0.0);
  }
  EncoderState<double> state(c, shared(w));
  TokenGrid<double> z(4, 6, random_tensor({24, 8}, 6));
  EXPECT_EQ(transformer_layer(z, 0, state), z);
}

TEST(TransformerLayer, SingleTokenIsPerTokenMlp) {
  ModelConfig c = small_config(TaskMode::kSequence);
  c.image_h = c.image_w = c.patch;
  auto w = init_encoder_weights<double>(c, 7);
  const auto& lw = w.layers[0];
  EncoderState<double> state(c, shared(w));
  TokenGrid<double> z(1, 1, random_tensor({1, 8}, 8));
  auto got = transformer_layer(z, 0, state);
  // One token: spatial and both temporal softmaxes are over a single key.
  auto h = layer_norm(z.tokens(), lw.ln1_gamma, lw.ln1_beta);
  auto v = matmul(h, lw.attention.w_v);
  auto o = matmul(v, lw.attention.w_o);
  auto xt = matmul(v, lw.attention.w_to_xt);
  auto ty = matmul(v, lw.attention.w_to_ty);
  Tensor<double> y({1, 8});
  for (std::size_t i = 0; i < 8; ++i)
    y[i] = o[i] + lw.attention.alpha_xt[i] * xt[i] + lw.attention.alpha_ty[i] * ty[i] +
           z.tokens()[i];
  auto want = add(mlp_forward(layer_norm(y, lw.ln2_gamma, lw.ln2_beta), lw.mlp), y);
  EXPECT_LE(max_abs_diff(got.tokens(), want), 1e-13);
}

TEST(TransformerLayer, ComposesModuleOperations) {
  const ModelConfig c = small_config(TaskMode::kFrame);
  auto w = init_encoder_weights<double>(c, 9);
  w.set_fusion_gates(0.7);
  const auto& lw = w.layers[1];
  EncoderState<double> state(c, shared(w));
  TokenGrid<double> z(4, 6, random_tensor({24, 8}, 10));
  auto got = transformer_layer(z, 1, state);

  TokenGrid<double> h(4, 6, layer_norm(z.tokens(), lw.ln1_gamma, lw.ln1_beta));
  StreamingOptions opts;
  opts.window = c.window;
  auto attn = streaming_t2d_attention(h, MemoryPool<double>(c.memory_capacity), lw.attention, 1, opts);
  auto y = add(attn.output.tokens(), z.tokens());
  auto want = add(mlp_forward(layer_norm(y, lw.ln2_gamma, lw.ln2_beta), lw.mlp), y);
  EXPECT_EQ(got.tokens(), want);
  EXPECT_EQ(state.pools()[1].size(), 1u);
}

TEST(ResNetBlock, ZeroConvIsIdentity) {
  ModelConfig c = small_config();
  auto w = init_encoder_weights<double>(c, 11).blocks[0];
  w.conv1.fill(0.0);
  w.conv2.fill(0.0);
  auto f = random_tensor({8, 4, 6}, 12);
  EXPECT_EQ(resnet_block(f, w), f);
}

TEST(ResNetBlock, ImpulseFootprintIsFiveByFive) {
  auto w = init_encoder_weights<double>(small_config(), 13).blocks[0];
  Tensor<double> f({8, 9, 9});
  for (std::size_t c = 0; c < 8; ++c) f.at(c, 4, 4) = static_cast<double>(c) - 3.0;
  auto out = resnet_block(f, w);
  for (std::size_t y = 0; y < 9; ++y) {
    for (std::size_t x = 0; x < 9; ++x) {
      const bool inside = y >= 2 && y <= 6 && x >= 2 && x <= 6;
      double mag = 0;
      for (std::size_t c = 0; c < 8; ++c) mag = std::max(mag, std::abs(out.at(c, y, x)));
      if (!inside) EXPECT_EQ(mag, 0.0) << y << "," << x;
    }
  }
  double corner = 0;
  for (std::size_t c = 0; c < 8; ++c) corner = std::max(corner, std::abs(out.at(c, 2, 2)));
  EXPECT_GT(corner, 0.0);
}

TEST(ResNetBlock, CarriesPerturbationAcrossWindows) {
  auto w = init_encoder_weights<double>(small_config(), 14).blocks[0];
  auto f = random_tensor({8, 4, 4}, 15);
  auto g = f;
  g.at(0, 1, 1) += 1.0;  // inside the top-left 2×2 window
  auto a = resnet_block(f, w), b = resnet_block(g, w);
  double diff = 0;
  for (std::size_t c = 0; c < 8; ++c) diff = std::max(diff, std::abs(a.at(c, 2, 2) - b.at(c, 2, 2)));
  EXPECT_GT(diff, 0.0);
}

TEST(Adaptor, LevelSizesAtPatch16) {
  AdaptorWeights<double> w;
  w.up4 = Tensor<double>({4, 2, 8, 8});
  w.up2 = Tensor<double>({4, 3, 4, 4});
  w.lateral = Tensor<double>({5, 4, 1, 1});
  w.down = Tensor<double>({6, 4, 2, 2});
  auto p = resolution_adaptor(random_tensor({4, 14, 14}, 1), w);
  EXPECT_EQ(p.levels[0].shape(), (Shape{2, 56, 56}));
  EXPECT_EQ(p.levels[1].shape(), (Shape{3, 28, 28}));
  EXPECT_EQ(p.levels[2].shape(), (Shape{5, 14, 14}));
  EXPECT_EQ(p.levels[3].shape(), (Shape{6, 7, 7}));
  for (const auto& l : p.levels) EXPECT_EQ(max_abs(l), 0.0);
}

TEST(Adaptor, LevelsAreTheirKernels) {
  auto w = *init_encoder_weights<double>(small_config(), 16).adaptor;
  auto f = random_tensor({8, 4, 6}, 17);
  auto p = resolution_adaptor(f, w);
  EXPECT_EQ(p.levels[0], conv2d_transpose(f, w.up4, 4));
  EXPECT_EQ(p.levels[1], conv2d_transpose(f, w.up2, 2));
  EXPECT_EQ(p.levels[2], conv2d(f, w.lateral, 1, 0));
  EXPECT_EQ(p.levels[3], conv2d(f, w.down, 2, 0));
  EXPECT_EQ(p.levels[0].shape(), (Shape{4, 16, 24}));
  EXPECT_EQ(p.levels[3].shape(), (Shape{10, 2, 3}));
}

TEST(Adaptor, OddMapRejected) {
  auto w = *init_encoder_weights<double>(small_config(), 16).adaptor;
  EXPECT_THROW(resolution_adaptor(random_tensor({8, 3, 4}, 1), w), ConfigError);
}

TEST(EncodeSequence, SingleFrameEqualsEncodeFrame) {
  const ModelConfig c = small_config();
  auto w = shared(init_encoder_weights<double>(c, 18));
  auto f = frames(c, 1, 19);
  EncoderState<double> a(c, w), b(c, w);
  auto seq = encode_sequence(a, std::span<const Tensor<double>>(f));
  ASSERT_EQ(seq.size(), 1u);
  auto one = encode_frame(b, f[0]);
  EXPECT_EQ(seq[0].tokens, one.tokens);
  EXPECT_EQ(seq[0].pyramid->levels[0], one.pyramid->levels[0]);
}

TEST(EncodeSequence, PoolsHoldAtMostCapacity) {
  const ModelConfig c = small_config();
  EncoderState<double> state(c, shared(init_encoder_weights<double>(c, 20)));
  auto f = frames(c, 3, 21);
  encode_sequence(state, std::span<const Tensor<double>>(f));
  for (const auto& pool : state.pools()) {
    EXPECT_EQ(pool.size(), 2u);
    EXPECT_EQ(pool.back().frame_index, 3);
  }
  EXPECT_EQ(state.next_frame_index(), 4);
}

TEST(EncodeSequence, PrefixMatchesShorterRun) {
  const ModelConfig c = small_config();
  auto w = shared(init_encoder_weights<double>(c, 22));
  auto f = frames(c, 4, 23);
  EncoderState<double> full(c, w), prefix(c, w);
  auto all = encode_sequence(full, std::span<const Tensor<double>>(f));
  auto two = encode_sequence(prefix, std::span<const Tensor<double>>(f).first(2));
  EXPECT_EQ(all[0].tokens, two[0].tokens);
  EXPECT_EQ(all[1].tokens, two[1].tokens);
}

TEST(EncodeSequence, ResetRestartsNumbering) {
  const ModelConfig c = small_config();
  auto w = shared(init_encoder_weights<double>(c, 24));
  auto f = frames(c, 2, 25);
  EncoderState<double> state(c, w);
  auto first = encode_frame(state, f[0]);
  encode_frame(state, f[1]);
  state.reset();
  EXPECT_EQ(state.next_frame_index(), 1);
  EXPECT_EQ(encode_frame(state, f[0]).tokens, first.tokens);
}

TEST(EncodeSequence, EmptyInputThrows) {
  const ModelConfig c = small_config();
  EncoderState<double> state(c, shared(init_encoder_weights<double>(c, 26)));
  EXPECT_THROW(encode_sequence(state, std::span<const Tensor<double>>()), ConfigError);
}

TEST(ImageBackbone, ZeroGatesReproduceIt) {
  const ModelConfig c = small_config();
  auto w = init_encoder_weights<double>(c, 27);
  w.set_fusion_gates(0.0);
  auto ws = shared(w);
  auto f = frames(c, 3, 28);
  EncoderState<double> state(c, ws);
  for (const auto& frame : f) {
    auto streamed = encode_frame(state, frame);
    auto image = image_vit_forward(*ws, c, frame);
    EXPECT_EQ(streamed.tokens, image.tokens);
    for (std::size_t l = 0; l < 4; ++l)
      EXPECT_EQ(streamed.pyramid->levels[l], image.pyramid->levels[l]);
  }
}

TEST(ImageBackbone, DefaultGatesMoveLaterFrames) {
  const ModelConfig c = small_config();
  auto ws = shared(init_encoder_weights<double>(c, 29));
  auto f = frames(c, 2, 30);
  EncoderState<double> state(c, ws);
  encode_frame(state, f[0]);
  EXPECT_NE(encode_frame(state, f[1]).tokens, image_vit_forward(*ws, c, f[1]).tokens);
}

TEST(Weights, SeedDeterminesWeights) {
  const ModelConfig c = small_config();
  auto a = init_encoder_weights<double>(c, 31), b = init_encoder_weights<double>(c, 31);
  auto d = init_encoder_weights<double>(c, 32);
  EXPECT_EQ(a.patch_embed, b.patch_embed);
  EXPECT_EQ(a.layers[1].mlp.w2, b.layers[1].mlp.w2);
  EXPECT_NE(a.patch_embed, d.patch_embed);
  EXPECT_EQ(a.layers[0].attention.alpha_xt[0], 1e-4);
  EXPECT_EQ(a.blocks.size(), 2u);
  auto f32 = init_encoder_weights<float>(c, 31);
  EXPECT_EQ(f32.patch_embed, tensor_cast<float>(a.patch_embed));
}

}  // namespace
}  // namespace svit
