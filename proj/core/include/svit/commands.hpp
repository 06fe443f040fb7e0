#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "svit/config.hpp"
#include "svit/synthetic.hpp"

namespace svit {

// Everything the command line can set. Unset optionals keep the value from
// the config file (or the built-in preset when no file is given).
struct CommandOptions {
  std::optional<std::string> config_path;
  std::string preset = "desk";  // desk | vit-base
  std::optional<std::string> seq_path;
  std::optional<std::string> out_path;
  std::optional<std::size_t> seeds;
  std::size_t jobs = 1;
  std::optional<Dtype> dtype;
  std::optional<Capacity> memory;
  std::optional<TaskMode> mode;
  std::optional<std::size_t> frames;
  std::optional<std::uint64_t> seed;

  // gen
  std::optional<std::size_t> height;
  std::optional<std::size_t> width;
  SequenceKind kind = SequenceKind::kNoise;

  // flops: also run the instrumented count and compare.
  bool instrumented = false;
  // verify: run with the memory-push fault injected.
  bool inject_fault = false;
  // verify: compare every clip length, not only the full clip.
  bool every_length = false;
  // verify: run only these suites (all when empty).
  std::vector<std::string> suites;
};

RunConfig resolve_config(const CommandOptions& options);

// Each command writes its report to `out` and returns the process exit code.
// Invalid input raises svit::Error.
int cmd_gen(const CommandOptions& options, std::ostream& out);
int cmd_encode(const CommandOptions& options, std::ostream& out);
int cmd_verify(const CommandOptions& options, std::ostream& out);
int cmd_flops(const CommandOptions& options, std::ostream& out);
int cmd_gradcheck(const CommandOptions& options, std::ostream& out);
int cmd_bench(const CommandOptions& options, std::ostream& out);

}  // namespace svit
