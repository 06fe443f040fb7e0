#include "svit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svit/errors.hpp"
#include "svit/rng.hpp"

namespace svit {

namespace {

constexpr double kBlobAmplitude[3] = {1.0, 0.6, -0.8};

std::size_t wrap(long long v, std::size_t n) {
  const long long m = static_cast<long long>(n);
  return static_cast<std::size_t>(((v % m) + m) % m);
}

double torus_distance(std::size_t a, std::size_t b, std::size_t n) {
  const std::size_t d = a > b ? a - b : b - a;
  return static_cast<double>(std::min(d, n - d));
}

}  // namespace

std::string_view to_string(SequenceKind kind) {
  return kind == SequenceKind::kNoise ? "noise" : "moving-blob";
}

SequenceKind parse_sequence_kind(std::string_view s) {
  if (s == "noise") return SequenceKind::kNoise;
  if (s == "moving-blob" || s == "blob") return SequenceKind::kMovingBlob;
  throw ConfigError("unknown sequence kind '" + std::string(s) + "'");
}

std::pair<std::size_t, std::size_t> blob_center(std::uint64_t seed, std::size_t height,
                                                std::size_t width, std::size_t t,
                                                const BlobOptions& blob) {
  if (t == 0) throw ConfigError("frames are numbered from 1");
  Rng rng(seed);
  const long long y0 = static_cast<long long>(rng.below(height));
  const long long x0 = static_cast<long long>(rng.below(width));
  const long long step = static_cast<long long>(t) - 1;
  return {wrap(y0 + step * blob.dy, height), wrap(x0 + step * blob.dx, width)};
}

Sequence gen_sequence(std::uint64_t seed, std::size_t frames, std::size_t height,
                      std::size_t width, SequenceKind kind, const BlobOptions& blob) {
  if (height == 0 || width == 0) throw ConfigError("frame size must be positive");
  if (!(blob.sigma > 0)) throw ConfigError("blob sigma must be positive");
  Sequence seq;
  seq.height = height;
  seq.width = width;
  Rng rng(seed);
  for (std::size_t t = 1; t <= frames; ++t) {
    Tensor<float> f({3, height, width});
    if (kind == SequenceKind::kNoise) {
      for (auto& v : f.data()) v = static_cast<float>(rng.normal());
    } else {
      const auto [cy, cx] = blob_center(seed, height, width, t, blob);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double dy = torus_distance(y, cy, height);
          const double dx = torus_distance(x, cx, width);
          const double g = std::exp(-(dy * dy + dx * dx) / (2 * blob.sigma * blob.sigma));
          for (std::size_t c = 0; c < 3; ++c) {
            f.at(c, y, x) = static_cast<float>(kBlobAmplitude[c] * g);
          }
        }
      }
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace svit
