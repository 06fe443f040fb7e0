#include <gtest/gtest.h>

#include "svit/flops.hpp"

namespace svit {
namespace {

ModelConfig flop_config(TaskMode mode, Capacity m, std::size_t h = 24, std::size_t w = 16) {
  ModelConfig c = ModelConfig::desk();
  c.image_h = h;
  c.image_w = w;
  c.channels = 8;
  c.heads = 2;
  c.layers = 2;
  c.stages = 2;
  c.window = 2;
  c.memory_capacity = m;
  c.adaptor_channels = {4, 4, 8, 8};
  c.mode = mode;
  c.decoder_layers = 1;
  return c;
}

std::uint64_t sum_min(std::size_t frames, Capacity m) {
  std::uint64_t s = 0;
  for (std::size_t t = 1; t <= frames; ++t) s += m ? std::min(t, *m) : t;
  return s;
}

TEST(CrossAttentionMacs, ClosedForms) {
  EXPECT_EQ(t2d_cross_attention_macs(4, 4, 8, 2), 4096u);
  EXPECT_EQ(joint_cross_attention_macs(4, 4, 8, 2), 8192u);
  EXPECT_EQ(t2d_cross_attention_macs(14, 14, 768, 1), 2u * (14 * 196 + 14 * 196) * 768);
}

TEST(CrossAttentionMacs, MemoryFramesVisible) {
  EXPECT_EQ(memory_frames_at(5, 8, 3, FlopMode::kStreaming), 3u);
  EXPECT_EQ(memory_frames_at(2, 8, 3, FlopMode::kStreaming), 2u);
  EXPECT_EQ(memory_frames_at(2, 8, std::nullopt, FlopMode::kClip), 8u);
  EXPECT_EQ(memory_frames_at(2, 8, 3, FlopMode::kFrame), 0u);
}

TEST(ClosedForm, TemporalTermIsSummationIdentity) {
  for (Capacity m : {Capacity{1}, Capacity{2}, Capacity{}}) {
    for (std::size_t frames : {1u, 3u, 6u}) {
      auto c = flop_config(TaskMode::kFrame, m);
      auto r = closed_form_flops(c, frames, FlopMode::kStreaming);
      const std::uint64_t want = 2ull * (c.grid_h() * c.grid_w() * c.grid_w() +
                                         c.grid_w() * c.grid_h() * c.grid_h()) *
                                 sum_min(frames, m) * c.channels * c.layers;
      EXPECT_EQ(r.macs(CostCategory::kTemporalCrossAttention), want);
    }
  }
}

TEST(ClosedForm, SingleFrameStreamingAddsOnlyTheTemporalPath) {
  auto c = flop_config(TaskMode::kFrame, 4);
  auto frame = closed_form_flops(c, 1, FlopMode::kFrame);
  auto stream = closed_form_flops(c, 1, FlopMode::kStreaming);
  for (std::size_t i = 0; i < kCostCategoryCount; ++i) {
    const auto cat = static_cast<CostCategory>(i);
    if (cat == CostCategory::kTemporalCrossAttention || cat == CostCategory::kTemporalProjection)
      continue;
    EXPECT_EQ(frame.by_category[i], stream.by_category[i]) << cost_category_name(cat);
  }
  EXPECT_EQ(frame.macs(CostCategory::kTemporalCrossAttention), 0u);
  EXPECT_GT(stream.macs(CostCategory::kTemporalCrossAttention), 0u);
}

TEST(ClosedForm, TotalIsSumOfParts) {
  auto r = closed_form_flops(flop_config(TaskMode::kSequence, 2), 5, FlopMode::kClip);
  std::uint64_t s = 0;
  for (auto v : r.by_category) s += v;
  EXPECT_EQ(r.total(), s);
  ASSERT_EQ(r.per_frame.size(), 5u);
}

TEST(Instrumented, MatchesClosedFormExactly) {
  for (TaskMode mode : {TaskMode::kFrame, TaskMode::kSequence}) {
    for (FlopMode fm : {FlopMode::kFrame, FlopMode::kStreaming}) {
      auto c = flop_config(mode, 2);
      auto closed = closed_form_flops(c, 4, fm);
      auto counted = instrumented_flops(c, 4, fm, 3);
      EXPECT_EQ(counted.by_category, closed.by_category)
          << to_string(mode) << "/" << to_string(fm);
      EXPECT_EQ(counted.per_frame, closed.per_frame);
    }
  }
  // The clip path needs global attention.
  auto c = flop_config(TaskMode::kSequence, std::nullopt);
  EXPECT_EQ(instrumented_flops(c, 3, FlopMode::kClip).by_category,
            closed_form_flops(c, 3, FlopMode::kClip).by_category);
}

TEST(Instrumented, MemoryOneVersusUnboundedRatio) {
  auto one = instrumented_flops(flop_config(TaskMode::kSequence, 1), 8, FlopMode::kStreaming);
  auto inf = instrumented_flops(flop_config(TaskMode::kSequence, std::nullopt), 8,
                                FlopMode::kStreaming);
  EXPECT_EQ(one.macs(CostCategory::kTemporalCrossAttention) * 36,
            inf.macs(CostCategory::kTemporalCrossAttention) * 8);
}

TEST(Ordering, FrameStreamingClip) {
  auto c = flop_config(TaskMode::kSequence, 2);
  const auto f = closed_form_flops(c, 6, FlopMode::kFrame).total();
  const auto s = closed_form_flops(c, 6, FlopMode::kStreaming).total();
  const auto k = closed_form_flops(c, 6, FlopMode::kClip).total();
  EXPECT_LT(f, s);
  EXPECT_LT(s, k);
  auto vit = ModelConfig::vit_base(TaskMode::kSequence);
  const auto vf = closed_form_flops(vit, 16, FlopMode::kFrame).total();
  const auto vs = closed_form_flops(vit, 16, FlopMode::kStreaming).total();
  const auto vk = closed_form_flops(vit, 16, FlopMode::kClip).total();
  EXPECT_LT(vf, vs);
  EXPECT_LT(vs, vk);
}

TEST(Report, KeyValueBlock) {
  auto r = closed_form_flops(flop_config(TaskMode::kFrame, 2), 2, FlopMode::kStreaming);
  const std::string text = format_flop_report(r);
  EXPECT_NE(text.find("mode=streaming\n"), std::string::npos);
  EXPECT_NE(text.find("macs.total=" + std::to_string(r.total()) + "\n"), std::string::npos);
  EXPECT_NE(text.find("macs.frame.2="), std::string::npos);
}

}  // namespace
}  // namespace svit
