#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "svit/commands.hpp"
#include "svit/errors.hpp"

namespace {

using svit::CommandOptions;

void add_common(CLI::App* cmd, CommandOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value config file");
  cmd->add_option("--preset", o.preset, "built-in config when --config is absent")
      ->check(CLI::IsMember({"desk", "vit-base"}));
  cmd->add_option_function<std::string>(
      "--dtype", [&o](const std::string& s) { o.dtype = svit::parse_dtype(s); },
      "element type: f32 | f64");
  cmd->add_option_function<std::string>(
      "--memory", [&o](const std::string& s) { o.memory = svit::parse_capacity(s); },
      "memory length M (integer or inf)");
  cmd->add_option_function<std::string>(
      "--mode", [&o](const std::string& s) { o.mode = svit::parse_task_mode(s); },
      "task mode: frame | sequence");
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--out", o.out_path, "output file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming T2D vision transformer toolkit"};
  app.require_subcommand(1);
  CommandOptions o;

  std::map<CLI::App*, int (*)(const CommandOptions&, std::ostream&)> handlers;

  auto* gen = app.add_subcommand("gen", "write a synthetic sequence file");
  add_common(gen, o);
  gen->add_option("--frames", o.frames, "number of frames");
  gen->add_option("--height", o.height, "frame height (default: config image size)");
  gen->add_option("--width", o.width, "frame width (default: config image size)");
  gen->add_option_function<std::string>(
      "--kind", [&o](const std::string& s) { o.kind = svit::parse_sequence_kind(s); },
      "noise | moving-blob");
  handlers[gen] = svit::cmd_gen;

  auto* encode = app.add_subcommand("encode", "stream a sequence through the encoder");
  add_common(encode, o);
  encode->add_option("--seq", o.seq_path, "sequence file")->required();
  handlers[encode] = svit::cmd_encode;

  auto* verify = app.add_subcommand("verify", "run the equivalence and memory suites");
  add_common(verify, o);
  verify->add_option("--seeds", o.seeds, "seeds per suite");
  verify->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  verify->add_option("--frames", o.frames, "clip length");
  verify->add_flag("--every-length", o.every_length, "check every clip length 1..frames");
  verify->add_option("--suite", o.suites,
                     "streaming-oracle | causality | prefix | gate-off | memory-length");
  verify->add_flag("--inject-fault", o.inject_fault, "drop frames from memory (test hook)");
  handlers[verify] = svit::cmd_verify;

  auto* flops = app.add_subcommand("flops", "MAC accounting for frame/streaming/clip");
  add_common(flops, o);
  flops->add_option("--frames", o.frames, "clip length T");
  flops->add_flag("--instrumented", o.instrumented, "cross-check against counted kernels");
  handlers[flops] = svit::cmd_flops;

  auto* grad = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  add_common(grad, o);
  grad->add_option("--seeds", o.seeds, "number of seeds");
  grad->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  handlers[grad] = svit::cmd_gradcheck;

  auto* bench = app.add_subcommand("bench", "wall-clock per streamed frame");
  add_common(bench, o);
  bench->add_option("--seq", o.seq_path, "sequence file (default: seeded noise)");
  bench->add_option("--frames", o.frames, "frames when no --seq is given");
  handlers[bench] = svit::cmd_bench;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const svit::Error& e) {
    std::cerr << "svit: " << e.what() << "\n";
    return 2;
  }

  try {
    for (const auto& [cmd, handler] : handlers) {
      if (cmd->parsed()) return handler(o, std::cout);
    }
  } catch (const svit::Error& e) {
    std::cerr << "svit: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
