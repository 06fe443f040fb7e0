#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "svit/memory_pool.hpp"

namespace svit {

// Frame-task: windowed attention, ResNet blocks at stage ends and the
// resolution adaptor. Sequence-task: global attention, pooled features go to
// the temporal decoder.
enum class TaskMode { kFrame, kSequence };

enum class Dtype { kF32, kF64 };

std::string_view to_string(TaskMode mode);
std::string_view to_string(Dtype dtype);
TaskMode parse_task_mode(std::string_view s);
Dtype parse_dtype(std::string_view s);
// "inf" / "unbounded" or a positive integer.
Capacity parse_capacity(std::string_view s);
std::string capacity_to_string(Capacity c);

struct ModelConfig {
  std::size_t image_h = 32;
  std::size_t image_w = 32;
  std::size_t patch = 4;
  std::size_t channels = 32;
  std::size_t layers = 4;
  std::size_t stages = 4;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::optional<std::size_t> window = 4;
  Capacity memory_capacity = 8;
  double fusion_init = 1e-4;
  TaskMode mode = TaskMode::kFrame;
  // Output channels of the stride 4/8/16/32 adaptor levels.
  std::array<std::size_t, 4> adaptor_channels{32, 32, 32, 32};
  bool memory_offset_embedding = false;
  std::size_t decoder_layers = 4;
  std::size_t num_classes = 10;
  bool decoder_pos_embedding = true;
  std::size_t decoder_max_frames = 64;

  std::size_t grid_h() const { return image_h / patch; }
  std::size_t grid_w() const { return image_w / patch; }
  std::size_t tokens() const { return grid_h() * grid_w(); }
  std::size_t layers_per_stage() const { return layers / stages; }
  std::size_t mlp_hidden() const { return mlp_ratio * channels; }
  // Window actually applied to spatial attention (sequence mode is global).
  std::optional<std::size_t> effective_window() const {
    return mode == TaskMode::kFrame ? window : std::nullopt;
  }
  bool is_stage_end(std::size_t layer) const {
    return (layer + 1) % layers_per_stage() == 0;
  }

  // Throws ConfigError on the first violated constraint.
  void validate() const;

  // Test-scale configuration: 32×32 image, patch 4 (8×8 tokens), C=32,
  // 4 heads, 4 layers in 4 stages, window 4, memory 8.
  static ModelConfig desk();
  // ViT-B/16 at 224×224 (14×14 tokens), 12 layers in 4 stages.
  static ModelConfig vit_base(TaskMode mode);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct RunConfig {
  ModelConfig model;
  std::uint64_t seed = 0;
  Dtype dtype = Dtype::kF64;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// `key = value` lines; '#' starts a comment; unknown or repeated keys are
// errors. Keys missing from the text keep their defaults, except
// adaptor_channels which defaults to `channels` at every level.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& config);

}  // namespace svit
