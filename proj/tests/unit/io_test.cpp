#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "svit/config.hpp"
#include "svit/errors.hpp"
#include "svit/io.hpp"
#include "svit/synthetic.hpp"

namespace svit {
namespace {

std::string header(std::string_view magic, std::initializer_list<std::uint32_t> fields) {
  std::string s(magic);
  for (std::uint32_t v : fields)
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  return s;
}

TEST(SequenceFile, ByteLayout) {
  Sequence seq;
  seq.height = 1;
  seq.width = 1;
  seq.frames.push_back(Tensor<float>({3, 1, 1}, {1.0f, -2.0f, 0.5f}));
  const std::string bytes = serialize_sequence(seq);
  ASSERT_EQ(bytes.size(), 24u + 12u);
  EXPECT_EQ(bytes.substr(0, 24), header("SVSQ", {1, 1, 3, 1, 1}));
  // 1.0f = 0x3f800000, little-endian.
  EXPECT_EQ(bytes.substr(24, 4), std::string("\x00\x00\x80\x3f", 4));
  EXPECT_EQ(parse_sequence(bytes), seq);
}

TEST(SequenceFile, RoundTrip) {
  const Sequence seq = gen_sequence(5, 3, 8, 12, SequenceKind::kNoise);
  EXPECT_EQ(parse_sequence(serialize_sequence(seq)), seq);
}

TEST(SequenceFile, Malformed) {
  const std::string good = serialize_sequence(gen_sequence(1, 2, 4, 4, SequenceKind::kNoise));
  auto offset_of = [](const std::string& bytes) -> std::uint64_t {
    try {
      parse_sequence(bytes);
    } catch (const FormatError& e) {
      return e.offset();
    }
    return ~0ull;
  };
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(offset_of(bad_magic), 0u);
  std::string bad_version = good;
  bad_version[4] = 2;
  EXPECT_EQ(offset_of(bad_version), 4u);
  std::string bad_channels = good;
  bad_channels[12] = 4;
  EXPECT_EQ(offset_of(bad_channels), 12u);
  EXPECT_EQ(offset_of(good.substr(0, good.size() - 1)), 24u);
  EXPECT_EQ(offset_of(good + "x"), 24u);
  EXPECT_EQ(offset_of(good.substr(0, 10)), 8u);
  EXPECT_THROW(parse_sequence(header("SVSQ", {1, 0, 3, 4, 4})), FormatError);
  try {
    parse_sequence(bad_version);
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 4"), std::string::npos);
  }
}

TEST(FeatureDump, RoundTripWithAndWithoutPyramid) {
  FeatureDump dump;
  dump.rows = 2;
  dump.cols = 3;
  dump.channels = 4;
  for (int t = 0; t < 2; ++t) {
    Tensor<float> tok({6, 4});
    for (std::size_t i = 0; i < tok.size(); ++i) tok[i] = static_cast<float>(i) * 0.25f - t;
    dump.tokens.push_back(tok);
  }
  const std::string plain = serialize_features(dump);
  EXPECT_EQ(plain.size(), 24u + 2 * 24 * 4 + 4);
  EXPECT_EQ(parse_features(plain), dump);

  for (int t = 0; t < 2; ++t) {
    dump.pyramids.push_back({Tensor<float>::filled({2, 8, 12}, 1.0f + t),
                             Tensor<float>::filled({2, 4, 6}, 2.0f),
                             Tensor<float>::filled({3, 2, 3}, 3.0f),
                             Tensor<float>::filled({3, 1, 1}, -4.0f)});
  }
  const std::string full = serialize_features(dump);
  EXPECT_EQ(parse_features(full), dump);
  EXPECT_THROW(parse_features(full.substr(0, full.size() - 4)), FormatError);
  std::string bad = plain;
  bad[0] = 'S';
  bad[1] = 'V';
  bad[2] = 'S';
  EXPECT_THROW(parse_features(bad), FormatError);
}

TEST(Checksum, Fnv1aOfLittleEndianBits) {
  EXPECT_EQ(checksum(Tensor<float>({1}, {1.0f})), 0x4b72477f9c5c2f98ULL);
}

TEST(Files, WriteReadRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "svit_io_test.svsq").string();
  const Sequence seq = gen_sequence(2, 2, 4, 4, SequenceKind::kMovingBlob);
  write_sequence(path, seq);
  EXPECT_EQ(read_sequence(path), seq);
  std::filesystem::remove(path);
  EXPECT_THROW(read_sequence(path), Error);
}

TEST(Synthetic, DeterministicPerSeed) {
  EXPECT_EQ(serialize_sequence(gen_sequence(9, 3, 8, 8, SequenceKind::kNoise)),
            serialize_sequence(gen_sequence(9, 3, 8, 8, SequenceKind::kNoise)));
  EXPECT_NE(gen_sequence(9, 1, 8, 8, SequenceKind::kNoise),
            gen_sequence(10, 1, 8, 8, SequenceKind::kNoise));
}

TEST(Synthetic, BlobMovesByOffset) {
  BlobOptions opts;
  opts.dx = 3;
  opts.dy = -2;
  const auto seq = gen_sequence(4, 2, 16, 20, SequenceKind::kMovingBlob, opts);
  auto peak = [](const Tensor<float>& f) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < f.dim(1) * f.dim(2); ++i)
      if (f[i] > f[best]) best = i;
    return std::pair{best / f.dim(2), best % f.dim(2)};
  };
  const auto [y1, x1] = peak(seq.frames[0]);
  const auto [y2, x2] = peak(seq.frames[1]);
  EXPECT_EQ(std::pair(y1, x1), blob_center(4, 16, 20, 1, opts));
  EXPECT_EQ(y2, (y1 + 16 - 2) % 16);
  EXPECT_EQ(x2, (x1 + 3) % 20);
  EXPECT_FLOAT_EQ(seq.frames[0].at(0, y1, x1), 1.0f);
}

TEST(Synthetic, NoiseStatistics) {
  const auto seq = gen_sequence(3, 8, 32, 32, SequenceKind::kNoise);
  double sum = 0, sq = 0, n = 0;
  for (const auto& f : seq.frames)
    for (float v : f.data()) {
      sum += v;
      sq += static_cast<double>(v) * v;
      ++n;
    }
  const double mean = sum / n, var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Synthetic, KindNames) {
  EXPECT_EQ(parse_sequence_kind("moving-blob"), SequenceKind::kMovingBlob);
  EXPECT_EQ(to_string(SequenceKind::kNoise), "noise");
  EXPECT_THROW(parse_sequence_kind("stripes"), ConfigError);
}

TEST(Config, ParseSerializeIdentity) {
  RunConfig run;
  run.model = ModelConfig::desk();
  run.model.memory_capacity = std::nullopt;
  run.model.window.reset();
  run.model.fusion_init = 0.125;
  run.model.adaptor_channels = {8, 16, 32, 64};
  run.seed = 77;
  run.dtype = Dtype::kF32;
  const std::string text = serialize_config(run);
  EXPECT_EQ(parse_config(text), run);
  EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(Config, CommentsWhitespaceAndDefaults) {
  auto run = parse_config("# desk run\n  seed=3 \n\nchannels = 16  # narrower\nheads = 2\n"
                          "memory_capacity = inf\nmode = sequence\n");
  EXPECT_EQ(run.seed, 3u);
  EXPECT_EQ(run.model.channels, 16u);
  EXPECT_FALSE(run.model.memory_capacity.has_value());
  EXPECT_EQ(run.model.mode, TaskMode::kSequence);
  EXPECT_EQ(run.model.adaptor_channels, (std::array<std::size_t, 4>{16, 16, 16, 16}));
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config("colour = blue\n"), ConfigError);
  EXPECT_THROW(parse_config("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("seed 1\n"), FormatError);
  EXPECT_THROW(parse_config("heads = 5\n"), ConfigError);
  EXPECT_THROW(parse_config("memory_capacity = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("dtype = f16\n"), ConfigError);
  EXPECT_THROW(parse_config("image_h = 30\n"), ConfigError);
}

TEST(Config, Presets) {
  auto vit = ModelConfig::vit_base(TaskMode::kFrame);
  EXPECT_EQ(vit.grid_h(), 14u);
  EXPECT_EQ(vit.layers, 12u);
  EXPECT_NO_THROW(vit.validate());
  auto desk = ModelConfig::desk();
  EXPECT_EQ(desk.tokens(), 64u);
  EXPECT_EQ(desk.fusion_init, 1e-4);
}

}  // namespace
}  // namespace svit
