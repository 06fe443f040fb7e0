#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "svit/tensor.hpp"

namespace svit {

inline constexpr std::uint32_t kFormatVersion = 1;

// Raw RGB frames, each [3×H×W].
struct Sequence {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Tensor<float>> frames;

  std::size_t frame_count() const { return frames.size(); }
  friend bool operator==(const Sequence&, const Sequence&) = default;
};

// Final token grids of every frame ([N×C] each) and, when the encoder ran in
// frame mode, the four adaptor levels of every frame ([C_s×h_s×w_s] each).
struct FeatureDump {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
  std::vector<Tensor<float>> tokens;
  std::vector<std::array<Tensor<float>, 4>> pyramids;  // empty or one per frame

  std::size_t frame_count() const { return tokens.size(); }
  friend bool operator==(const FeatureDump&, const FeatureDump&) = default;
};

// "SVSQ", u32 version, T, 3, H, W, then T·3·H·W f32, all little-endian.
std::string serialize_sequence(const Sequence& seq);
Sequence parse_sequence(std::string_view bytes);

// "SVFT", u32 version, T, N_h, N_w, C, T·N·C f32 token values, then a u32
// pyramid flag. When the flag is 1, four level headers (C_s, h_s, w_s) follow,
// then for each frame the four levels' f32 values in level order.
std::string serialize_features(const FeatureDump& dump);
FeatureDump parse_features(std::string_view bytes);

Sequence read_sequence(const std::string& path);
void write_sequence(const std::string& path, const Sequence& seq);
FeatureDump read_features(const std::string& path);
void write_features(const std::string& path, const FeatureDump& dump);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

// FNV-1a over the little-endian f32 encoding of the values.
std::uint64_t checksum(const Tensor<float>& t);

}  // namespace svit
