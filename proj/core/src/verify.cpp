#include "svit/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>

#include "svit/dense_oracle.hpp"
#include "svit/encoder.hpp"
#include "svit/synthetic.hpp"
#include "svit/weights.hpp"

namespace svit {

namespace {

struct CaseOutcome {
  bool pass = true;
  double deviation = 0;
  std::string failure;
};

// Runs fn(0..n-1) on up to `jobs` threads. Cases share nothing mutable.
std::vector<CaseOutcome> run_cases(std::size_t n, std::size_t jobs,
                                   const std::function<CaseOutcome(std::size_t)>& fn) {
  std::vector<CaseOutcome> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

SuiteResult merge(VerifySuite suite, const std::vector<CaseOutcome>& outcomes) {
  SuiteResult r;
  r.suite = suite;
  r.cases = outcomes.size();
  for (const auto& o : outcomes) {
    r.max_deviation = std::max(r.max_deviation, o.deviation);
    if (!o.pass && r.pass) {
      r.pass = false;
      r.failure = o.failure;
    }
  }
  return r;
}

template <Real T>
std::vector<Tensor<T>> frames_as(const Sequence& seq) {
  std::vector<Tensor<T>> out;
  for (const auto& f : seq.frames) out.push_back(tensor_cast<T>(f));
  return out;
}

std::uint64_t data_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed * 0x9e3779b97f4a7c15ULL + stream;
}

template <Real T>
double deviation(const FrameFeatures<T>& a, const FrameFeatures<T>& b) {
  double d = static_cast<double>(max_abs_diff(a.tokens.tokens(), b.tokens.tokens()));
  if (a.pyramid.has_value() != b.pyramid.has_value()) {
    throw DimensionError("feature pyramids present on one side only");
  }
  if (a.pyramid) {
    for (std::size_t l = 0; l < 4; ++l) {
      d = std::max(d, static_cast<double>(
                          max_abs_diff(a.pyramid->levels[l], b.pyramid->levels[l])));
    }
  }
  return d;
}

template <Real T>
bool identical(const FrameFeatures<T>& a, const FrameFeatures<T>& b) {
  if (!(a.tokens == b.tokens)) return false;
  if (a.pyramid.has_value() != b.pyramid.has_value()) return false;
  if (a.pyramid) {
    for (std::size_t l = 0; l < 4; ++l) {
      if (!(a.pyramid->levels[l] == b.pyramid->levels[l])) return false;
    }
  }
  return true;
}

std::string case_name(std::uint64_t seed, const ModelConfig& cfg) {
  return "seed=" + std::to_string(seed) + " heads=" + std::to_string(cfg.heads) +
         " M=" + capacity_to_string(cfg.memory_capacity);
}

template <Real T>
class Harness {
 public:
  Harness(const RunConfig& config, const VerifyOptions& options)
      : config_(config), options_(options) {}

  std::shared_ptr<const EncoderWeights<T>> weights(const ModelConfig& cfg, std::uint64_t seed,
                                                   std::optional<double> gate = {}) const {
    auto w = std::make_shared<EncoderWeights<T>>(init_encoder_weights<T>(cfg, seed));
    if (gate) w->set_fusion_gates(static_cast<T>(*gate));
    return w;
  }

  std::vector<Tensor<T>> sequence(const ModelConfig& cfg, std::uint64_t seed,
                                  SequenceKind kind, std::size_t frames) const {
    return frames_as<T>(gen_sequence(seed, frames, cfg.image_h, cfg.image_w, kind));
  }

  std::vector<FrameFeatures<T>> stream(const ModelConfig& cfg,
                                       std::shared_ptr<const EncoderWeights<T>> w,
                                       std::span<const Tensor<T>> frames) const {
    EncoderState<T> state(cfg, std::move(w),
                          EncoderOptions{.skip_memory_push = options_.fault_skip_memory_push});
    return encode_sequence(state, frames);
  }

  std::uint64_t seed(std::size_t i) const { return config_.seed + i; }

  SuiteResult streaming_oracle() const {
    struct Case {
      std::size_t heads;
      Capacity capacity;
      std::uint64_t seed;
    };
    std::vector<Case> cases;
    for (std::size_t h : options_.heads) {
      if (h == 0 || config_.model.channels % h != 0) continue;
      for (const auto& m : options_.capacities) {
        for (std::size_t s = 0; s < options_.seeds; ++s) cases.push_back({h, m, seed(s)});
      }
    }
    const double tol = equivalence_tolerance(config_.dtype);
    auto outcomes = run_cases(cases.size(), options_.jobs, [&](std::size_t i) {
      const Case& c = cases[i];
      ModelConfig cfg = config_.model;
      cfg.heads = c.heads;
      cfg.memory_capacity = c.capacity;
      cfg.window.reset();
      cfg.memory_offset_embedding = cfg.memory_offset_embedding && c.capacity.has_value();
      cfg.validate();
      const auto w = weights(cfg, c.seed, options_.oracle_gate);
      const auto frames = sequence(cfg, data_seed(c.seed, 1), SequenceKind::kNoise,
                                   options_.frames);
      const auto streamed = stream(cfg, w, frames);
      const TemporalMask mask{MaskMode::kCausal, c.capacity};
      CaseOutcome out;
      const std::size_t first = options_.every_length ? 1 : frames.size();
      for (std::size_t len = first; len <= frames.size(); ++len) {
        const auto clip = clip_t2d_forward<T>(std::span(frames).first(len), *w, cfg, mask);
        for (std::size_t t = 0; t < len; ++t) {
          const double d = deviation(streamed[t], clip[t]);
          out.deviation = std::max(out.deviation, d);
          if (!(d <= tol) && out.pass) {
            out.pass = false;
            out.failure = case_name(c.seed, cfg) + " T=" + std::to_string(len) +
                          " frame " + std::to_string(t + 1) + " deviates by " +
                          std::to_string(d);
          }
        }
      }
      return out;
    });
    return merge(VerifySuite::kStreamingOracle, outcomes);
  }

  // Changing frames after k leaves outputs 1..k untouched; changing frame 1
  // changes frame 2 whenever memory can hold two frames.
  SuiteResult causality() const {
    const ModelConfig& cfg = config_.model;
    const bool past_visible = !cfg.memory_capacity || *cfg.memory_capacity >= 2;
    auto outcomes = run_cases(options_.seeds, options_.jobs, [&](std::size_t i) {
      const std::uint64_t s = seed(i);
      const auto w = weights(cfg, s);
      const auto base = sequence(cfg, data_seed(s, 1), SequenceKind::kNoise, options_.frames);
      const auto other = sequence(cfg, data_seed(s, 2), SequenceKind::kNoise, options_.frames);
      const auto ref = stream(cfg, w, base);
      CaseOutcome out;
      for (std::size_t k = 1; k < base.size(); ++k) {
        auto edited = base;
        for (std::size_t t = k; t < base.size(); ++t) edited[t] = other[t];
        const auto got = stream(cfg, w, edited);
        for (std::size_t t = 0; t < k; ++t) {
          if (!identical(ref[t], got[t])) {
            out.deviation = std::max(out.deviation, deviation(ref[t], got[t]));
            if (out.pass) {
              out.pass = false;
              out.failure = case_name(s, cfg) + ": frame " + std::to_string(t + 1) +
                            " changed when frames > " + std::to_string(k) + " changed";
            }
          }
        }
      }
      if (past_visible && base.size() >= 2) {
        auto edited = base;
        edited[0] = other[0];
        const auto got = stream(cfg, w, edited);
        if (identical(ref[1], got[1]) && out.pass) {
          out.pass = false;
          out.failure = case_name(s, cfg) + ": frame 2 ignores frame 1";
        }
      }
      return out;
    });
    return merge(VerifySuite::kCausality, outcomes);
  }

  // Encoding a prefix yields exactly the prefix of the full encoding, also
  // after reset() on a used state.
  SuiteResult prefix() const {
    const ModelConfig& cfg = config_.model;
    auto outcomes = run_cases(options_.seeds, options_.jobs, [&](std::size_t i) {
      const std::uint64_t s = seed(i);
      const auto w = weights(cfg, s);
      const auto frames = sequence(cfg, data_seed(s, 1), SequenceKind::kNoise, options_.frames);
      EncoderState<T> state(cfg, w,
                            EncoderOptions{.skip_memory_push = options_.fault_skip_memory_push});
      const auto full = encode_sequence(state, std::span<const Tensor<T>>(frames));
      CaseOutcome out;
      for (std::size_t k = 1; k <= frames.size(); ++k) {
        state.reset();
        const auto part = encode_sequence(state, std::span<const Tensor<T>>(frames).first(k));
        for (std::size_t t = 0; t < k; ++t) {
          if (!identical(full[t], part[t])) {
            out.deviation = std::max(out.deviation, deviation(full[t], part[t]));
            if (out.pass) {
              out.pass = false;
              out.failure = case_name(s, cfg) + ": prefix of " + std::to_string(k) +
                            " differs at frame " + std::to_string(t + 1);
            }
          }
        }
      }
      return out;
    });
    return merge(VerifySuite::kPrefix, outcomes);
  }

  // Zero gates reproduce the image backbone bit for bit; the configured
  // gates move every frame after the first.
  SuiteResult gate_off() const {
    const ModelConfig& cfg = config_.model;
    auto outcomes = run_cases(options_.seeds, options_.jobs, [&](std::size_t i) {
      const std::uint64_t s = seed(i);
      const auto frames = sequence(cfg, data_seed(s, 1), SequenceKind::kNoise, options_.frames);
      const auto off = weights(cfg, s, 0.0);
      const auto on = weights(cfg, s);
      const auto streamed_off = stream(cfg, off, frames);
      const auto streamed_on = stream(cfg, on, frames);
      CaseOutcome out;
      for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto image = image_vit_forward(*off, cfg, frames[t]);
        if (!identical(streamed_off[t], image)) {
          out.deviation = std::max(out.deviation, deviation(streamed_off[t], image));
          if (out.pass) {
            out.pass = false;
            out.failure = case_name(s, cfg) + ": gates=0 frame " + std::to_string(t + 1) +
                          " differs from the image backbone";
          }
        }
        if (t >= 1 && identical(streamed_on[t], image) && out.pass) {
          out.pass = false;
          out.failure = case_name(s, cfg) + ": default gates leave frame " +
                        std::to_string(t + 1) + " unchanged";
        }
      }
      return out;
    });
    return merge(VerifySuite::kGateOff, outcomes);
  }

  // M ≥ T matches unbounded memory exactly, M=1 differs from it for t ≥ 2,
  // and any M leaves frames t ≤ M untouched.
  SuiteResult memory_length() const {
    auto outcomes = run_cases(options_.seeds, options_.jobs, [&](std::size_t i) {
      const std::uint64_t s = seed(i);
      const std::size_t frames_n = options_.frames;
      auto with_capacity = [&](Capacity m) {
        ModelConfig cfg = config_.model;
        cfg.memory_capacity = m;
        cfg.memory_offset_embedding = false;
        return cfg;
      };
      const ModelConfig unbounded = with_capacity(std::nullopt);
      const auto w = weights(unbounded, s);
      const auto frames = sequence(unbounded, data_seed(s, 3), SequenceKind::kMovingBlob,
                                   frames_n);
      const auto ref = stream(unbounded, w, frames);
      CaseOutcome out;
      auto fail = [&](const std::string& msg) {
        if (out.pass) {
          out.pass = false;
          out.failure = "seed=" + std::to_string(s) + ": " + msg;
        }
      };
      for (std::size_t m : {frames_n, frames_n + 2}) {
        const auto got = stream(with_capacity(m), w, frames);
        for (std::size_t t = 0; t < frames_n; ++t) {
          if (!identical(ref[t], got[t])) {
            out.deviation = std::max(out.deviation, deviation(ref[t], got[t]));
            fail("M=" + std::to_string(m) + " differs from unbounded at frame " +
                 std::to_string(t + 1));
          }
        }
      }
      for (std::size_t m : {std::size_t{1}, std::size_t{2}}) {
        const auto got = stream(with_capacity(m), w, frames);
        for (std::size_t t = 0; t < frames_n; ++t) {
          const bool same = identical(ref[t], got[t]);
          if (t < m && !same) {
            out.deviation = std::max(out.deviation, deviation(ref[t], got[t]));
            fail("M=" + std::to_string(m) + " changed frame " + std::to_string(t + 1));
          }
          if (m == 1 && t >= 1 && same) {
            fail("M=1 matches unbounded memory at frame " + std::to_string(t + 1));
          }
        }
      }
      return out;
    });
    return merge(VerifySuite::kMemoryLength, outcomes);
  }

  SuiteResult run(VerifySuite suite) const {
    switch (suite) {
      case VerifySuite::kStreamingOracle:
        return streaming_oracle();
      case VerifySuite::kCausality:
        return causality();
      case VerifySuite::kPrefix:
        return prefix();
      case VerifySuite::kGateOff:
        return gate_off();
      case VerifySuite::kMemoryLength:
        return memory_length();
    }
    throw ConfigError("unknown verify suite");
  }

 private:
  RunConfig config_;
  VerifyOptions options_;
};

}  // namespace

std::string_view to_string(VerifySuite suite) {
  switch (suite) {
    case VerifySuite::kStreamingOracle:
      return "streaming-oracle";
    case VerifySuite::kCausality:
      return "causality";
    case VerifySuite::kPrefix:
      return "prefix";
    case VerifySuite::kGateOff:
      return "gate-off";
    case VerifySuite::kMemoryLength:
      return "memory-length";
  }
  return "?";
}

VerifySuite parse_verify_suite(std::string_view name) {
  for (VerifySuite s : kAllSuites) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown verify suite '" + std::string(name) + "'");
}

bool VerifyReport::pass() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.pass; });
}

double equivalence_tolerance(Dtype dtype) { return dtype == Dtype::kF32 ? 1e-5 : 1e-12; }

SuiteResult run_suite(VerifySuite suite, const RunConfig& config, const VerifyOptions& options) {
  config.model.validate();
  if (options.frames == 0) throw ConfigError("verify needs at least one frame");
  if (config.dtype == Dtype::kF32) return Harness<float>(config, options).run(suite);
  return Harness<double>(config, options).run(suite);
}

VerifyReport run_verify(const RunConfig& config, const VerifyOptions& options,
                        const std::vector<VerifySuite>& suites) {
  VerifyReport report;
  report.dtype = config.dtype;
  report.tolerance = equivalence_tolerance(config.dtype);
  for (VerifySuite s : suites) report.suites.push_back(run_suite(s, config, options));
  return report;
}

std::string format_verify_report(const VerifyReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %6s  %-12s %s\n", "suite", "cases", "max_dev",
                "status");
  out += line;
  for (const auto& s : report.suites) {
    std::snprintf(line, sizeof line, "%-18s %6zu  %-12.3e %s\n",
                  std::string(to_string(s.suite)).c_str(), s.cases, s.max_deviation,
                  s.pass ? "PASS" : "FAIL");
    out += line;
    if (!s.pass) out += "  first failure: " + s.failure + "\n";
  }
  out += "\n";
  out += "dtype=" + std::string(to_string(report.dtype)) + "\n";
  std::snprintf(line, sizeof line, "tolerance=%.1e\n", report.tolerance);
  out += line;
  for (const auto& s : report.suites) {
    const std::string key = "suite." + std::string(to_string(s.suite));
    std::snprintf(line, sizeof line, "%s.cases=%zu\n%s.max_dev=%.6e\n%s.status=%s\n",
                  key.c_str(), s.cases, key.c_str(), s.max_deviation, key.c_str(),
                  s.pass ? "PASS" : "FAIL");
    out += line;
  }
  out += std::string("status=") + (report.pass() ? "PASS" : "FAIL") + "\n";
  return out;
}

}  // namespace svit
