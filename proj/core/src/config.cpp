#include "svit/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "svit/errors.hpp"

namespace svit {

std::string_view to_string(TaskMode mode) {
  return mode == TaskMode::kFrame ? "frame" : "sequence";
}

std::string_view to_string(Dtype dtype) {
  return dtype == Dtype::kF32 ? "f32" : "f64";
}

TaskMode parse_task_mode(std::string_view s) {
  if (s == "frame") return TaskMode::kFrame;
  if (s == "sequence") return TaskMode::kSequence;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected frame|sequence)");
}

Dtype parse_dtype(std::string_view s) {
  if (s == "f32") return Dtype::kF32;
  if (s == "f64") return Dtype::kF64;
  throw ConfigError("unknown dtype '" + std::string(s) + "' (expected f32|f64)");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(std::string_view s, std::string_view key) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ConfigError("invalid integer '" + std::string(s) + "' for " +
                      std::string(key));
  }
  return v;
}

double parse_real(std::string_view s, std::string_view key) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ConfigError("invalid number '" + std::string(s) + "' for " +
                      std::string(key));
  }
  return v;
}

bool parse_bool(std::string_view s, std::string_view key) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("invalid boolean '" + std::string(s) + "' for " +
                    std::string(key));
}

std::string format_real(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

Capacity parse_capacity(std::string_view s) {
  if (s == "inf" || s == "unbounded") return std::nullopt;
  const auto v = parse_u64(s, "memory_capacity");
  if (v == 0) throw ConfigError("memory_capacity must be at least 1");
  return static_cast<std::size_t>(v);
}

std::string capacity_to_string(Capacity c) {
  return c ? std::to_string(*c) : "inf";
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (patch == 0 || image_h == 0 || image_w == 0) fail("image and patch sizes must be positive");
  if (image_h % patch || image_w % patch) {
    fail("image " + std::to_string(image_h) + "x" + std::to_string(image_w) +
         " is not divisible by patch " + std::to_string(patch));
  }
  if (channels == 0 || layers == 0 || stages == 0 || heads == 0 || mlp_ratio == 0)
    fail("channels, layers, stages, heads and mlp_ratio must be positive");
  if (layers % stages) fail("layers must be a multiple of stages");
  if (channels % heads) fail("heads must divide channels");
  if (window && *window == 0) fail("window must be positive");
  if (memory_capacity && *memory_capacity == 0) fail("memory_capacity must be at least 1");
  if (memory_offset_embedding && !memory_capacity)
    fail("memory_offset_embedding requires a bounded memory_capacity");
  if (mode == TaskMode::kFrame) {
    // The adaptor's stride-2 level halves the token grid exactly.
    if (grid_h() % 2 || grid_w() % 2) fail("frame mode needs an even token grid");
    for (auto c : adaptor_channels)
      if (c == 0) fail("adaptor_channels must be positive");
  }
  if (decoder_layers == 0 || num_classes == 0 || decoder_max_frames == 0)
    fail("decoder_layers, num_classes and decoder_max_frames must be positive");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::vit_base(TaskMode mode) {
  ModelConfig c;
  c.image_h = c.image_w = 224;
  c.patch = 16;
  c.channels = 768;
  c.layers = 12;
  c.stages = 4;
  c.heads = 12;
  c.window = 14;
  c.memory_capacity = std::nullopt;
  c.mode = mode;
  c.adaptor_channels = {768, 768, 768, 768};
  c.num_classes = 400;
  return c;
}

namespace {

struct Field {
  std::function<void(RunConfig&, std::string_view)> parse;
  std::function<std::string(const RunConfig&)> print;
};

// Serialization order is the order of this table.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto size_field = [&t](const char* key, std::size_t ModelConfig::*m) {
      t.push_back({key,
                   {[m, key](RunConfig& r, std::string_view v) {
                      r.model.*m = parse_u64(v, key);
                    },
                    [m](const RunConfig& r) { return std::to_string(r.model.*m); }}});
    };
    auto bool_field = [&t](const char* key, bool ModelConfig::*m) {
      t.push_back({key,
                   {[m, key](RunConfig& r, std::string_view v) {
                      r.model.*m = parse_bool(v, key);
                    },
                    [m](const RunConfig& r) { return bool_str(r.model.*m); }}});
    };
    size_field("image_h", &ModelConfig::image_h);
    size_field("image_w", &ModelConfig::image_w);
    size_field("patch", &ModelConfig::patch);
    size_field("channels", &ModelConfig::channels);
    size_field("layers", &ModelConfig::layers);
    size_field("stages", &ModelConfig::stages);
    size_field("heads", &ModelConfig::heads);
    size_field("mlp_ratio", &ModelConfig::mlp_ratio);
    t.push_back({"window",
                 {[](RunConfig& r, std::string_view v) {
                    if (v == "none") {
                      r.model.window.reset();
                    } else {
                      r.model.window = parse_u64(v, "window");
                    }
                  },
                  [](const RunConfig& r) {
                    return r.model.window ? std::to_string(*r.model.window)
                                          : std::string("none");
                  }}});
    t.push_back({"memory_capacity",
                 {[](RunConfig& r, std::string_view v) {
                    r.model.memory_capacity = parse_capacity(v);
                  },
                  [](const RunConfig& r) {
                    return capacity_to_string(r.model.memory_capacity);
                  }}});
    t.push_back({"fusion_init",
                 {[](RunConfig& r, std::string_view v) {
                    r.model.fusion_init = parse_real(v, "fusion_init");
                  },
                  [](const RunConfig& r) { return format_real(r.model.fusion_init); }}});
    t.push_back({"mode",
                 {[](RunConfig& r, std::string_view v) { r.model.mode = parse_task_mode(v); },
                  [](const RunConfig& r) { return std::string(to_string(r.model.mode)); }}});
    t.push_back({"adaptor_channels",
                 {[](RunConfig& r, std::string_view v) {
                    std::array<std::size_t, 4> out{};
                    std::size_t n = 0;
                    std::size_t start = 0;
                    while (start <= v.size()) {
                      auto comma = v.find(',', start);
                      if (comma == std::string_view::npos) comma = v.size();
                      if (n == 4) throw ConfigError("adaptor_channels takes 4 values");
                      out[n++] = parse_u64(trim(v.substr(start, comma - start)),
                                           "adaptor_channels");
                      start = comma + 1;
                    }
                    if (n != 4) throw ConfigError("adaptor_channels takes 4 values");
                    r.model.adaptor_channels = out;
                  },
                  [](const RunConfig& r) {
                    const auto& a = r.model.adaptor_channels;
                    return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," +
                           std::to_string(a[2]) + "," + std::to_string(a[3]);
                  }}});
    bool_field("memory_offset_embedding", &ModelConfig::memory_offset_embedding);
    size_field("decoder_layers", &ModelConfig::decoder_layers);
    size_field("num_classes", &ModelConfig::num_classes);
    bool_field("decoder_pos_embedding", &ModelConfig::decoder_pos_embedding);
    size_field("decoder_max_frames", &ModelConfig::decoder_max_frames);
    t.push_back({"seed",
                 {[](RunConfig& r, std::string_view v) { r.seed = parse_u64(v, "seed"); },
                  [](const RunConfig& r) { return std::to_string(r.seed); }}});
    t.push_back({"dtype",
                 {[](RunConfig& r, std::string_view v) { r.dtype = parse_dtype(v); },
                  [](const RunConfig& r) { return std::string(to_string(r.dtype)); }}});
    return t;
  }();
  return table;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    ++line_no;
    pos = nl + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("config line " + std::to_string(line_no) +
                            ": expected 'key = value'", line_no);
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("duplicate config key '" + key + "'");
    it->second.parse(cfg, value);
  }
  if (!seen.contains("adaptor_channels")) cfg.model.adaptor_channels.fill(cfg.model.channels);
  cfg.model.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) {
    out += key + " = " + field.print(config) + "\n";
  }
  return out;
}

}  // namespace svit
