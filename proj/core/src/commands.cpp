#include "svit/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

#include "svit/encoder.hpp"
#include "svit/errors.hpp"
#include "svit/flops.hpp"
#include "svit/gradcheck.hpp"
#include "svit/io.hpp"
#include "svit/verify.hpp"
#include "svit/weights.hpp"

namespace svit {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void emit(const CommandOptions& options, std::ostream& out, const std::string& report) {
  out << report;
  if (options.out_path) write_file(*options.out_path, report);
}

template <Real T>
FeatureDump encode_to_dump(const RunConfig& run, const Sequence& seq) {
  const ModelConfig& cfg = run.model;
  auto weights = std::make_shared<const EncoderWeights<T>>(init_encoder_weights<T>(cfg, run.seed));
  EncoderState<T> state(cfg, weights);
  FeatureDump dump;
  dump.rows = cfg.grid_h();
  dump.cols = cfg.grid_w();
  dump.channels = cfg.channels;
  for (const auto& frame : seq.frames) {
    auto f = encode_frame(state, tensor_cast<T>(frame));
    dump.tokens.push_back(tensor_cast<float>(f.tokens.tokens()));
    if (f.pyramid) {
      std::array<Tensor<float>, 4> levels;
      for (std::size_t l = 0; l < 4; ++l) levels[l] = tensor_cast<float>(f.pyramid->levels[l]);
      dump.pyramids.push_back(std::move(levels));
    }
  }
  return dump;
}

std::vector<GradcheckCase> gradcheck_cases(std::uint64_t base_seed, std::size_t seeds) {
  std::vector<GradcheckCase> cases;
  for (std::size_t i = 0; i < seeds; ++i) {
    const std::uint64_t s = base_seed + i;
    GradcheckCase square;
    square.seed = s;
    square.rows = 4;
    square.cols = 4;
    cases.push_back(square);

    GradcheckCase wide;
    wide.seed = s;
    wide.rows = 3;
    wide.cols = 5;
    wide.capacity = 2;  // evicts the oldest history frame
    cases.push_back(wide);

    GradcheckCase windowed;
    windowed.seed = s;
    windowed.rows = 4;
    windowed.cols = 6;
    windowed.heads = 4;
    windowed.window = 3;
    cases.push_back(windowed);
  }
  return cases;
}

template <Real T>
double bench_encode(const RunConfig& run, const Sequence& seq, std::vector<double>& per_frame) {
  const ModelConfig& cfg = run.model;
  auto weights = std::make_shared<const EncoderWeights<T>>(init_encoder_weights<T>(cfg, run.seed));
  EncoderState<T> state(cfg, weights);
  double checksum_acc = 0;
  for (const auto& frame : seq.frames) {
    const auto input = tensor_cast<T>(frame);
    const auto start = std::chrono::steady_clock::now();
    const auto f = encode_frame(state, input);
    const auto stop = std::chrono::steady_clock::now();
    per_frame.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    checksum_acc += static_cast<double>(f.tokens.tokens()[0]);
  }
  return checksum_acc;
}

}  // namespace

RunConfig resolve_config(const CommandOptions& options) {
  RunConfig run;
  if (options.config_path) {
    run = load_config(*options.config_path);
  } else if (options.preset == "desk") {
    run.model = ModelConfig::desk();
  } else if (options.preset == "vit-base") {
    run.model = ModelConfig::vit_base(options.mode.value_or(TaskMode::kFrame));
  } else {
    throw ConfigError("unknown preset '" + options.preset + "'");
  }
  if (options.dtype) run.dtype = *options.dtype;
  if (options.memory) run.model.memory_capacity = *options.memory;
  if (options.mode) run.model.mode = *options.mode;
  if (options.seed) run.seed = *options.seed;
  run.model.validate();
  return run;
}

int cmd_gen(const CommandOptions& options, std::ostream& out) {
  if (!options.out_path) throw ConfigError("gen needs --out");
  const RunConfig run = resolve_config(options);
  const std::size_t frames = options.frames.value_or(8);
  const std::size_t h = options.height.value_or(run.model.image_h);
  const std::size_t w = options.width.value_or(run.model.image_w);
  const Sequence seq = gen_sequence(run.seed, frames, h, w, options.kind);
  const std::string bytes = serialize_sequence(seq);
  write_file(*options.out_path, bytes);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    out << "frame " << t + 1 << " checksum=" << hex64(checksum(seq.frames[t])) << "\n";
  }
  out << "\nkind=" << to_string(options.kind) << "\nseed=" << run.seed << "\nframes=" << frames
      << "\nheight=" << h << "\nwidth=" << w << "\nbytes=" << bytes.size() << "\n";
  return 0;
}

int cmd_encode(const CommandOptions& options, std::ostream& out) {
  if (!options.seq_path) throw ConfigError("encode needs --seq");
  const RunConfig run = resolve_config(options);
  const Sequence seq = read_sequence(*options.seq_path);
  if (seq.height != run.model.image_h || seq.width != run.model.image_w) {
    throw DimensionError("sequence frames are " + std::to_string(seq.height) + "x" +
                         std::to_string(seq.width) + " but the model expects " +
                         std::to_string(run.model.image_h) + "x" +
                         std::to_string(run.model.image_w));
  }
  const FeatureDump dump = run.dtype == Dtype::kF32 ? encode_to_dump<float>(run, seq)
                                                    : encode_to_dump<double>(run, seq);
  if (options.out_path) write_features(*options.out_path, dump);
  for (std::size_t t = 0; t < dump.frame_count(); ++t) {
    out << "frame " << t + 1 << " tokens=" << dump.rows << "x" << dump.cols << "x"
        << dump.channels << " checksum=" << hex64(checksum(dump.tokens[t]));
    if (!dump.pyramids.empty()) {
      std::uint64_t h = 0;
      for (const auto& level : dump.pyramids[t]) h = h * 31 + checksum(level);
      out << " pyramid=" << hex64(h);
    }
    out << "\n";
  }
  out << "\nframes=" << dump.frame_count() << "\nrows=" << dump.rows << "\ncols=" << dump.cols
      << "\nchannels=" << dump.channels << "\nmode=" << to_string(run.model.mode)
      << "\nmemory=" << capacity_to_string(run.model.memory_capacity)
      << "\ndtype=" << to_string(run.dtype) << "\nstatus=ok\n";
  return 0;
}

int cmd_verify(const CommandOptions& options, std::ostream& out) {
  const RunConfig run = resolve_config(options);
  VerifyOptions vo;
  vo.seeds = options.seeds.value_or(vo.seeds);
  vo.frames = options.frames.value_or(vo.frames);
  vo.jobs = options.jobs;
  vo.fault_skip_memory_push = options.inject_fault;
  vo.every_length = options.every_length;
  std::vector<VerifySuite> suites;
  for (const auto& name : options.suites) suites.push_back(parse_verify_suite(name));
  if (suites.empty()) suites.assign(std::begin(kAllSuites), std::end(kAllSuites));
  const VerifyReport report = run_verify(run, vo, suites);
  emit(options, out, format_verify_report(report));
  return report.pass() ? 0 : 1;
}

int cmd_flops(const CommandOptions& options, std::ostream& out) {
  const RunConfig run = resolve_config(options);
  const std::size_t frames = options.frames.value_or(16);
  std::ostringstream report;
  std::array<std::uint64_t, 3> totals{};
  std::size_t i = 0;
  bool counts_match = true;
  for (FlopMode mode : {FlopMode::kFrame, FlopMode::kStreaming, FlopMode::kClip}) {
    const FlopReport r = closed_form_flops(run.model, frames, mode);
    totals[i++] = r.total();
    report << format_flop_report(r) << "\n";
    if (options.instrumented) {
      const FlopReport measured = instrumented_flops(run.model, frames, mode, run.seed);
      const bool match = measured.by_category == r.by_category;
      counts_match = counts_match && match;
      report << "instrumented." << to_string(mode) << ".total=" << measured.total() << "\n"
             << "instrumented." << to_string(mode) << ".match=" << (match ? "true" : "false")
             << "\n\n";
    }
  }
  const bool ordered = totals[0] < totals[1] && totals[1] < totals[2];
  char line[96];
  std::snprintf(line, sizeof line, "%.2f",
                100.0 * (1.0 - static_cast<double>(totals[1]) / static_cast<double>(totals[2])));
  report << "summary.frame=" << totals[0] << "\nsummary.streaming=" << totals[1]
         << "\nsummary.clip=" << totals[2] << "\nsummary.ordering="
         << (ordered ? "frame<streaming<clip" : "violated")
         << "\nsummary.streaming_vs_clip_reduction_pct=" << line << "\n";
  if (options.instrumented) report << "summary.instrumented_match=" << (counts_match ? "true" : "false") << "\n";
  emit(options, out, report.str());
  return ordered && counts_match ? 0 : 1;
}

int cmd_gradcheck(const CommandOptions& options, std::ostream& out) {
  const RunConfig run = resolve_config(options);
  const auto cases = gradcheck_cases(run.seed, options.seeds.value_or(5));
  std::vector<GradcheckResult> results(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) results[i] = run_gradcheck(cases[i]);
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < std::min(options.jobs, cases.size()); ++t) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();
  constexpr double kTolerance = 1e-4;
  const std::string report = format_gradcheck_report(results, kTolerance);
  emit(options, out, report);
  return report.find("status=PASS") != std::string::npos ? 0 : 1;
}

int cmd_bench(const CommandOptions& options, std::ostream& out) {
  const RunConfig run = resolve_config(options);
  const std::size_t frames = options.frames.value_or(8);
  const Sequence seq = options.seq_path
                           ? read_sequence(*options.seq_path)
                           : gen_sequence(run.seed, frames, run.model.image_h, run.model.image_w,
                                          SequenceKind::kNoise);
  std::vector<double> per_frame;
  const double sink = run.dtype == Dtype::kF32 ? bench_encode<float>(run, seq, per_frame)
                                               : bench_encode<double>(run, seq, per_frame);
  // Encoding time only; weight initialisation is excluded.
  const double total = std::accumulate(per_frame.begin(), per_frame.end(), 0.0);
  char line[96];
  for (std::size_t t = 0; t < per_frame.size(); ++t) {
    std::snprintf(line, sizeof line, "frame %zu %.3f ms\n", t + 1, per_frame[t]);
    out << line;
  }
  std::snprintf(line, sizeof line, "\ntotal_ms=%.3f\nmean_frame_ms=%.3f\n", total,
                per_frame.empty() ? 0.0 : total / static_cast<double>(per_frame.size()));
  out << line << "frames=" << per_frame.size() << "\ndtype=" << to_string(run.dtype)
      << "\nfinite=" << (std::isfinite(sink) ? "true" : "false") << "\n";
  return 0;
}

}  // namespace svit
