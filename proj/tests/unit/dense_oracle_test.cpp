#include <gtest/gtest.h>

#include <memory>

#include "svit/dense_oracle.hpp"
#include "svit/encoder.hpp"
#include "svit/flops.hpp"
#include "svit/weights.hpp"
#include "test_support.hpp"

namespace svit {
namespace {

using testing::random_tensor;

ModelConfig oracle_config(TaskMode mode, Capacity m) {
  ModelConfig c = ModelConfig::desk();
  c.image_h = 16;
  c.image_w = 24;
  c.channels = 8;
  c.heads = 2;
  c.layers = 2;
  c.stages = 2;
  c.window.reset();
  c.memory_capacity = m;
  c.adaptor_channels = {4, 4, 8, 8};
  c.mode = mode;
  return c;
}

template <Real T>
std::vector<Tensor<T>> frames(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
  std::vector<Tensor<T>> out;
  for (std::size_t t = 0; t < n; ++t)
    out.push_back(random_tensor<T>({3, c.image_h, c.image_w}, seed + t));
  return out;
}

template <Real T>
std::vector<FrameFeatures<T>> stream(const ModelConfig& c, const EncoderWeights<T>& w,
                                     const std::vector<Tensor<T>>& f) {
  EncoderState<T> state(c, std::make_shared<const EncoderWeights<T>>(w));
  return encode_sequence(state, std::span<const Tensor<T>>(f));
}

TEST(ClipForward, SingleFrameIsBitIdentical) {
  const ModelConfig c = oracle_config(TaskMode::kFrame, 4);
  auto w = init_encoder_weights<double>(c, 1);
  w.set_fusion_gates(0.5);
  auto f = frames<double>(c, 1, 2);
  auto clip = clip_t2d_forward<double>(f, w, c, {MaskMode::kCausal, c.memory_capacity});
  auto streamed = stream(c, w, f);
  EXPECT_EQ(clip[0].tokens, streamed[0].tokens);
  for (std::size_t l = 0; l < 4; ++l)
    EXPECT_EQ(clip[0].pyramid->levels[l], streamed[0].pyramid->levels[l]);
}

TEST(ClipForward, CausalUnboundedMatchesStreaming) {
  for (TaskMode mode : {TaskMode::kFrame, TaskMode::kSequence}) {
    const ModelConfig c = oracle_config(mode, std::nullopt);
    auto w64 = init_encoder_weights<double>(c, 3);
    w64.set_fusion_gates(0.5);
    auto f64 = frames<double>(c, 4, 4);
    auto clip64 = clip_t2d_forward<double>(f64, w64, c, {MaskMode::kCausal, std::nullopt});
    auto s64 = stream(c, w64, f64);
    auto w32 = init_encoder_weights<float>(c, 3);
    w32.set_fusion_gates(0.5f);
    auto f32 = frames<float>(c, 4, 4);
    auto clip32 = clip_t2d_forward<float>(f32, w32, c, {MaskMode::kCausal, std::nullopt});
    auto s32 = stream(c, w32, f32);
    for (std::size_t t = 0; t < 4; ++t) {
      EXPECT_LE(max_abs_diff(clip64[t].tokens.tokens(), s64[t].tokens.tokens()), 1e-12);
      EXPECT_LE(max_abs_diff(clip32[t].tokens.tokens(), s32[t].tokens.tokens()), 1e-5f);
    }
  }
}

TEST(ClipForward, BoundedMaskMatchesRingBuffer) {
  const ModelConfig c = oracle_config(TaskMode::kSequence, 2);
  auto w = init_encoder_weights<double>(c, 5);
  w.set_fusion_gates(0.5);
  auto f = frames<double>(c, 5, 6);
  auto clip = clip_t2d_forward<double>(f, w, c, {MaskMode::kCausal, 2});
  auto s = stream(c, w, f);
  for (std::size_t t = 0; t < 5; ++t)
    EXPECT_LE(max_abs_diff(clip[t].tokens.tokens(), s[t].tokens.tokens()), 1e-12);
}

TEST(ClipForward, BidirectionalLeaksTheFuture) {
  const ModelConfig c = oracle_config(TaskMode::kSequence, std::nullopt);
  auto w = init_encoder_weights<double>(c, 7);
  auto f = frames<double>(c, 3, 8);
  auto causal = clip_t2d_forward<double>(f, w, c, {MaskMode::kCausal, std::nullopt});
  auto bidir = clip_t2d_forward<double>(f, w, c, {MaskMode::kBidirectional, std::nullopt});
  EXPECT_NE(causal[0].tokens, bidir[0].tokens);
}

TEST(ClipForward, WindowedSpatialMatchesStreaming) {
  ModelConfig c = oracle_config(TaskMode::kFrame, 2);
  c.window = 2;
  auto w = init_encoder_weights<double>(c, 9);
  w.set_fusion_gates(0.5);
  auto f = frames<double>(c, 3, 10);
  auto clip = clip_t2d_forward<double>(f, w, c, {MaskMode::kCausal, c.memory_capacity});
  auto streamed = stream(c, w, f);
  for (std::size_t t = 0; t < 3; ++t)
    EXPECT_LE(max_abs_diff(clip[t].tokens.tokens(), streamed[t].tokens.tokens()), 1e-12);
  c.window.reset();
  auto global = clip_t2d_forward<double>(f, w, c, {MaskMode::kCausal, c.memory_capacity});
  EXPECT_GT(max_abs_diff(clip[0].tokens.tokens(), global[0].tokens.tokens()), 1e-6);
}

TEST(TemporalMask, Admission) {
  TemporalMask causal{MaskMode::kCausal, 2};
  EXPECT_TRUE(causal.admits(3, 3));
  EXPECT_TRUE(causal.admits(3, 2));
  EXPECT_FALSE(causal.admits(3, 1));
  EXPECT_FALSE(causal.admits(3, 4));
  TemporalMask unbounded{MaskMode::kCausal, std::nullopt};
  EXPECT_TRUE(unbounded.admits(9, 1));
  TemporalMask bidir{MaskMode::kBidirectional, std::nullopt};
  EXPECT_TRUE(bidir.admits(1, 3));
}

TEST(JointAttention, DegenerateGridEqualsPlanes) {
  TokenGrid<double> q(1, 1, random_tensor({1, 4}, 1));
  std::vector<TokenGrid<double>> k, v;
  for (std::uint64_t s = 0; s < 3; ++s) {
    k.emplace_back(1, 1, random_tensor({1, 4}, 10 + s));
    v.emplace_back(1, 1, random_tensor({1, 4}, 20 + s));
  }
  auto joint = joint_cross_attention<double>(q, k, v, 2);
  EXPECT_EQ(joint, plane_cross_attention<double>(q, k, v, 2, true));
  EXPECT_EQ(joint, plane_cross_attention<double>(q, k, v, 2, false));
}

TEST(JointAttention, MacCountsAndRatio) {
  TokenGrid<double> q(4, 4, random_tensor({16, 8}, 1));
  std::vector<TokenGrid<double>> k, v;
  for (std::uint64_t s = 0; s < 2; ++s) {
    k.emplace_back(4, 4, random_tensor({16, 8}, 10 + s));
    v.emplace_back(4, 4, random_tensor({16, 8}, 20 + s));
  }
  MacCounter joint, planes;
  joint_cross_attention<double>(q, k, v, 2, &joint);
  plane_cross_attention<double>(q, k, v, 2, true, &planes);
  plane_cross_attention<double>(q, k, v, 2, false, &planes);
  EXPECT_EQ(joint.macs(), 8192u);
  EXPECT_EQ(planes.macs(), 4096u);
  EXPECT_EQ(joint.macs(), joint_cross_attention_macs(4, 4, 8, 2));
  EXPECT_EQ(planes.macs(), t2d_cross_attention_macs(4, 4, 8, 2));
  EXPECT_EQ(joint.macs() * (4 + 4), planes.macs() * (4 * 4));
}

TEST(JointAttention, FullClipDiffersFromPlanes) {
  const ModelConfig c = oracle_config(TaskMode::kSequence, std::nullopt);
  auto w = init_encoder_weights<double>(c, 11);
  w.set_fusion_gates(0.5);
  auto f = frames<double>(c, 2, 12);
  MacCounter counter;
  auto joint = full_joint_attention<double>(f, w, c, &counter);
  auto planes = clip_t2d_forward<double>(f, w, c, {});
  ASSERT_EQ(joint.size(), 2u);
  EXPECT_NE(joint[1], planes[1].tokens);
  const std::uint64_t per_layer = joint_cross_attention_macs(4, 6, 8, 1) +
                                  joint_cross_attention_macs(4, 6, 8, 2);
  EXPECT_EQ(counter.macs(CostCategory::kTemporalCrossAttention), 2 * per_layer);
}

}  // namespace
}  // namespace svit
