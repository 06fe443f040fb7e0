#include "svit/io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "svit/errors.hpp"

namespace svit {

namespace {

constexpr std::string_view kSequenceMagic = "SVSQ";
constexpr std::string_view kFeatureMagic = "SVFT";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

void put_values(std::string& out, const Tensor<float>& t) {
  for (float f : t.data()) put_f32(out, f);
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw DimensionError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void magic(std::string_view expected) {
    need(4, "magic");
    if (bytes_.substr(pos_, 4) != expected) {
      throw FormatError("bad magic, expected \"" + std::string(expected) + "\"", pos_);
    }
    pos_ += 4;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  void version() {
    const std::size_t at = pos_;
    const std::uint32_t v = u32("version");
    if (v != kFormatVersion) {
      throw FormatError("unsupported version " + std::to_string(v), at);
    }
  }

  Tensor<float> values(Shape shape, const char* what) {
    const std::size_t n = shape_numel(shape);
    need(4 * n, what);
    Tensor<float> t(std::move(shape));
    for (std::size_t i = 0; i < n; ++i) t[i] = std::bit_cast<float>(u32(what));
    return t;
  }

  void finish() {
    if (pos_ != bytes_.size()) {
      throw FormatError(std::to_string(bytes_.size() - pos_) + " trailing bytes", pos_);
    }
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated ") + what + ": need " + std::to_string(n) +
                            " bytes, have " + std::to_string(bytes_.size() - pos_),
                        pos_);
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_sequence(const Sequence& seq) {
  std::string out;
  out.reserve(24 + seq.frames.size() * 12 * seq.height * seq.width);
  out += kSequenceMagic;
  put_u32(out, kFormatVersion);
  put_u32(out, to_u32(seq.frames.size(), "frame count"));
  put_u32(out, 3);
  put_u32(out, to_u32(seq.height, "height"));
  put_u32(out, to_u32(seq.width, "width"));
  const Shape expected{3, seq.height, seq.width};
  for (const auto& f : seq.frames) {
    if (f.shape() != expected) {
      throw DimensionError("sequence frame " + shape_to_string(f.shape()) + ", expected " +
                           shape_to_string(expected));
    }
    put_values(out, f);
  }
  return out;
}

Sequence parse_sequence(std::string_view bytes) {
  Reader r(bytes);
  r.magic(kSequenceMagic);
  r.version();
  const std::uint32_t frames = r.u32("frame count");
  const std::size_t channels_at = r.pos();
  const std::uint32_t channels = r.u32("channel count");
  if (channels != 3) {
    throw FormatError("expected 3 channels, got " + std::to_string(channels), channels_at);
  }
  Sequence seq;
  seq.height = r.u32("height");
  seq.width = r.u32("width");
  if (frames == 0) throw FormatError("sequence has no frames", 8);
  if (seq.height == 0 || seq.width == 0) throw FormatError("empty frame size", 16);
  const std::size_t payload = std::size_t{frames} * 12 * seq.height * seq.width;
  if (bytes.size() - r.pos() != payload) {
    throw FormatError("payload is " + std::to_string(bytes.size() - r.pos()) +
                          " bytes, header declares " + std::to_string(payload),
                      r.pos());
  }
  for (std::uint32_t t = 0; t < frames; ++t) {
    seq.frames.push_back(r.values({3, seq.height, seq.width}, "frame"));
  }
  r.finish();
  return seq;
}

std::string serialize_features(const FeatureDump& dump) {
  std::string out;
  out += kFeatureMagic;
  put_u32(out, kFormatVersion);
  put_u32(out, to_u32(dump.tokens.size(), "frame count"));
  put_u32(out, to_u32(dump.rows, "rows"));
  put_u32(out, to_u32(dump.cols, "cols"));
  put_u32(out, to_u32(dump.channels, "channels"));
  const Shape token_shape{dump.rows * dump.cols, dump.channels};
  for (const auto& t : dump.tokens) {
    if (t.shape() != token_shape) {
      throw DimensionError("feature tokens " + shape_to_string(t.shape()) + ", expected " +
                           shape_to_string(token_shape));
    }
    put_values(out, t);
  }
  if (dump.pyramids.empty()) {
    put_u32(out, 0);
    return out;
  }
  if (dump.pyramids.size() != dump.tokens.size()) {
    throw DimensionError("feature dump has " + std::to_string(dump.pyramids.size()) +
                         " pyramids for " + std::to_string(dump.tokens.size()) + " frames");
  }
  put_u32(out, 1);
  const auto& first = dump.pyramids.front();
  for (const auto& level : first) {
    if (level.rank() != 3) throw DimensionError("pyramid level must be [C×h×w]");
    for (std::size_t d = 0; d < 3; ++d) put_u32(out, to_u32(level.dim(d), "level size"));
  }
  for (const auto& pyr : dump.pyramids) {
    for (std::size_t l = 0; l < 4; ++l) {
      if (pyr[l].shape() != first[l].shape()) {
        throw DimensionError("pyramid level " + std::to_string(l) + " changes shape");
      }
      put_values(out, pyr[l]);
    }
  }
  return out;
}

FeatureDump parse_features(std::string_view bytes) {
  Reader r(bytes);
  r.magic(kFeatureMagic);
  r.version();
  const std::uint32_t frames = r.u32("frame count");
  FeatureDump dump;
  dump.rows = r.u32("rows");
  dump.cols = r.u32("cols");
  dump.channels = r.u32("channels");
  for (std::uint32_t t = 0; t < frames; ++t) {
    dump.tokens.push_back(r.values({dump.rows * dump.cols, dump.channels}, "tokens"));
  }
  const std::size_t flag_at = r.pos();
  const std::uint32_t flag = r.u32("pyramid flag");
  if (flag > 1) throw FormatError("bad pyramid flag " + std::to_string(flag), flag_at);
  if (flag == 1) {
    std::array<Shape, 4> shapes;
    for (auto& s : shapes) {
      for (int d = 0; d < 3; ++d) s.push_back(r.u32("level size"));
    }
    for (std::uint32_t t = 0; t < frames; ++t) {
      std::array<Tensor<float>, 4> pyr;
      for (std::size_t l = 0; l < 4; ++l) pyr[l] = r.values(shapes[l], "pyramid level");
      dump.pyramids.push_back(std::move(pyr));
    }
  }
  r.finish();
  return dump;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

Sequence read_sequence(const std::string& path) { return parse_sequence(read_file(path)); }

void write_sequence(const std::string& path, const Sequence& seq) {
  write_file(path, serialize_sequence(seq));
}

FeatureDump read_features(const std::string& path) { return parse_features(read_file(path)); }

void write_features(const std::string& path, const FeatureDump& dump) {
  write_file(path, serialize_features(dump));
}

std::uint64_t checksum(const Tensor<float>& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (float f : t.data()) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace svit
