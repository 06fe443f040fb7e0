#include "svit/flops.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "svit/attention.hpp"
#include "svit/decoder.hpp"
#include "svit/dense_oracle.hpp"
#include "svit/encoder.hpp"
#include "svit/rng.hpp"

namespace svit {

std::string_view to_string(FlopMode mode) {
  switch (mode) {
    case FlopMode::kFrame: return "frame";
    case FlopMode::kStreaming: return "streaming";
    case FlopMode::kClip: return "clip";
  }
  return "unknown";
}

std::uint64_t FlopReport::total() const {
  return std::accumulate(by_category.begin(), by_category.end(), std::uint64_t{0});
}

std::uint64_t t2d_cross_attention_macs(std::size_t h, std::size_t w, std::size_t c,
                                       std::size_t memory_frames) {
  const std::uint64_t plane = static_cast<std::uint64_t>(h) * w * w +
                              static_cast<std::uint64_t>(w) * h * h;
  return 2 * plane * memory_frames * c;
}

std::uint64_t joint_cross_attention_macs(std::size_t h, std::size_t w, std::size_t c,
                                         std::size_t memory_frames) {
  const std::uint64_t n = static_cast<std::uint64_t>(h) * w;
  return 2 * n * n * memory_frames * c;
}

std::size_t memory_frames_at(std::size_t t, std::size_t frames, Capacity capacity,
                             FlopMode mode) {
  switch (mode) {
    case FlopMode::kFrame: return 0;
    case FlopMode::kStreaming: return capacity ? std::min(t, *capacity) : t;
    case FlopMode::kClip: return frames;
  }
  return 0;
}

FlopReport closed_form_flops(const ModelConfig& cfg, std::size_t frames, FlopMode mode) {
  cfg.validate();
  using u64 = std::uint64_t;
  FlopReport r;
  r.mode = mode;
  r.frames = frames;
  const u64 h = cfg.grid_h(), w = cfg.grid_w(), n = h * w, c = cfg.channels;
  const u64 hidden = cfg.mlp_hidden(), p = cfg.patch, heads = cfg.heads;
  auto charge = [&](CostCategory cat, u64 macs, u64& frame_total) {
    r.by_category[static_cast<std::size_t>(cat)] += macs;
    frame_total += macs;
  };

  // Spatial attention core: 2·n_tile²·C per tile.
  u64 core = 0, spatial_softmax = 0;
  if (auto win = cfg.effective_window()) {
    for (const auto& tile : window_partition(h, w, *win)) {
      core += 2 * tile.size() * tile.size() * c;
      spatial_softmax += tile.size() * tile.size() * heads;
    }
  } else {
    core = 2 * n * n * c;
    spatial_softmax = n * n * heads;
  }

  for (std::size_t t = 1; t <= frames; ++t) {
    u64 ft = 0;
    charge(CostCategory::kPatchEmbed, n * 3 * p * p * c, ft);
    const u64 tm = memory_frames_at(t, frames, cfg.memory_capacity, mode);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      charge(CostCategory::kSpatialAttention, 4 * n * c * c + core, ft);
      r.elements.softmax += spatial_softmax;
      if (mode != FlopMode::kFrame) {
        charge(CostCategory::kTemporalProjection, 3 * n * c * c, ft);
        charge(CostCategory::kTemporalCrossAttention, t2d_cross_attention_macs(h, w, c, tm), ft);
        r.elements.softmax += (h * w * w + w * h * h) * tm * heads;
      }
      charge(CostCategory::kMlp, 2 * n * c * hidden, ft);
      r.elements.layer_norm += 2 * n * c;
      r.elements.activation += n * hidden;
    }
    if (cfg.mode == TaskMode::kFrame) {
      charge(CostCategory::kResNetBlocks, cfg.stages * 2 * (c * c * 9 * n), ft);
      r.elements.layer_norm += cfg.stages * 2 * n * c;
      r.elements.activation += cfg.stages * n * c;
      const auto& ac = cfg.adaptor_channels;
      charge(CostCategory::kAdaptor,
             c * n * ac[0] * 64 + c * n * ac[1] * 16 + ac[2] * n * c + ac[3] * (n / 4) * c * 4,
             ft);
    }
    r.per_frame.push_back(ft);
  }

  if (cfg.mode == TaskMode::kSequence && frames > 0) {
    const u64 tf = frames;
    u64 dec = cfg.decoder_layers * (4 * tf * c * c + 2 * tf * tf * c + 2 * tf * c * hidden);
    dec += c * cfg.num_classes;
    r.by_category[static_cast<std::size_t>(CostCategory::kDecoder)] += dec;
    r.elements.softmax += cfg.decoder_layers * tf * tf * heads;
    r.elements.layer_norm += cfg.decoder_layers * 2 * tf * c;
    r.elements.activation += cfg.decoder_layers * tf * hidden;
  }
  return r;
}

namespace {

std::vector<Tensor<float>> noise_frames(const ModelConfig& cfg, std::size_t frames,
                                        std::uint64_t seed) {
  Rng rng(seed ^ 0xf10b5ULL);
  std::vector<Tensor<float>> out;
  for (std::size_t t = 0; t < frames; ++t) {
    Tensor<float> f({3, cfg.image_h, cfg.image_w});
    for (auto& x : f.data()) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

FlopReport instrumented_flops(const ModelConfig& cfg, std::size_t frames, FlopMode mode,
                              std::uint64_t seed) {
  cfg.validate();
  auto weights = std::make_shared<const EncoderWeights<float>>(
      init_encoder_weights<float>(cfg, seed));
  const auto clip = noise_frames(cfg, frames, seed);
  MacCounter counter;
  std::vector<FrameFeatures<float>> feats;
  switch (mode) {
    case FlopMode::kFrame:
      for (std::size_t t = 0; t < frames; ++t) {
        FrameScope fs(&counter, t);
        feats.push_back(image_vit_forward(*weights, cfg, clip[t], &counter));
      }
      break;
    case FlopMode::kStreaming: {
      EncoderState<float> state(cfg, weights);
      feats = encode_sequence<float>(state, clip, &counter);
      break;
    }
    case FlopMode::kClip:
      feats = clip_t2d_forward<float>(clip, *weights, cfg,
                                      TemporalMask{MaskMode::kBidirectional, std::nullopt},
                                      &counter);
      break;
  }
  if (cfg.mode == TaskMode::kSequence && frames > 0) {
    const auto dec = init_decoder_weights<float>(cfg, seed);
    decode(pool_frames<float>(feats), dec, &counter);
  }
  FlopReport r;
  r.mode = mode;
  r.frames = frames;
  r.by_category = counter.by_category();
  r.per_frame = counter.by_frame();
  r.per_frame.resize(frames, 0);
  return r;
}

std::string format_flop_report(const FlopReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "mode: %s  frames: %zu\n", std::string(to_string(r.mode)).c_str(),
                r.frames);
  out += line;
  std::snprintf(line, sizeof line, "%-26s %20s %9s\n", "component", "MACs", "share");
  out += line;
  const double total = static_cast<double>(std::max<std::uint64_t>(r.total(), 1));
  for (std::size_t i = 0; i < kCostCategoryCount; ++i) {
    std::snprintf(line, sizeof line, "%-26s %20llu %8.2f%%\n",
                  std::string(cost_category_name(static_cast<CostCategory>(i))).c_str(),
                  static_cast<unsigned long long>(r.by_category[i]),
                  100.0 * static_cast<double>(r.by_category[i]) / total);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-26s %20llu\n", "total",
                static_cast<unsigned long long>(r.total()));
  out += line;
  std::snprintf(line, sizeof line, "%-26s %20.3f\n", "total GMACs",
                static_cast<double>(r.total()) * 1e-9);
  out += line;

  out += "\n";
  out += "mode=" + std::string(to_string(r.mode)) + "\n";
  out += "frames=" + std::to_string(r.frames) + "\n";
  for (std::size_t i = 0; i < kCostCategoryCount; ++i) {
    out += "macs." + std::string(cost_category_name(static_cast<CostCategory>(i))) + "=" +
           std::to_string(r.by_category[i]) + "\n";
  }
  out += "macs.total=" + std::to_string(r.total()) + "\n";
  for (std::size_t t = 0; t < r.per_frame.size(); ++t) {
    out += "macs.frame." + std::to_string(t + 1) + "=" + std::to_string(r.per_frame[t]) + "\n";
  }
  out += "elements.softmax=" + std::to_string(r.elements.softmax) + "\n";
  out += "elements.layer_norm=" + std::to_string(r.elements.layer_norm) + "\n";
  out += "elements.activation=" + std::to_string(r.elements.activation) + "\n";
  return out;
}

}  // namespace svit
