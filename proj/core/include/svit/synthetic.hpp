#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>

#include "svit/io.hpp"

namespace svit {

enum class SequenceKind { kNoise, kMovingBlob };

std::string_view to_string(SequenceKind kind);
SequenceKind parse_sequence_kind(std::string_view s);

struct BlobOptions {
  // Per-frame translation in pixels (wraps around the frame).
  int dx = 2;
  int dy = 1;
  double sigma = 3.0;
};

// noise: i.i.d. N(0, 1) per value. moving-blob: a Gaussian blob (one
// amplitude per channel) whose center starts at a seeded integer position
// and moves by (dx, dy) each frame.
Sequence gen_sequence(std::uint64_t seed, std::size_t frames, std::size_t height,
                      std::size_t width, SequenceKind kind, const BlobOptions& blob = {});

// Center (y, x) of the blob in frame t (1-based).
std::pair<std::size_t, std::size_t> blob_center(std::uint64_t seed, std::size_t height,
                                                std::size_t width, std::size_t t,
                                                const BlobOptions& blob = {});

}  // namespace svit
