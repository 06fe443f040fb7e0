#pragma once

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "svit/config.hpp"

namespace svit {

enum class VerifySuite { kStreamingOracle, kCausality, kPrefix, kGateOff, kMemoryLength };

std::string_view to_string(VerifySuite suite);
VerifySuite parse_verify_suite(std::string_view name);

inline constexpr VerifySuite kAllSuites[] = {
    VerifySuite::kStreamingOracle, VerifySuite::kCausality, VerifySuite::kPrefix,
    VerifySuite::kGateOff, VerifySuite::kMemoryLength};

struct VerifyOptions {
  std::size_t seeds = 10;
  std::size_t frames = 6;
  std::size_t jobs = 1;
  // Streaming-vs-oracle grid. Head counts that do not divide C are skipped.
  std::vector<std::size_t> heads{1, 2, 4};
  std::vector<Capacity> capacities{1, 2, std::nullopt};
  // Also compare every clip length 1..frames against its own oracle run,
  // instead of only the full clip.
  bool every_length = false;
  // Fusion gates used by the streaming-vs-oracle suite, large enough that
  // the temporal branches dominate the deviation.
  double oracle_gate = 0.5;
  // Fault injection: the encoder does not retain frames in memory.
  bool fault_skip_memory_push = false;
};

struct SuiteResult {
  VerifySuite suite = VerifySuite::kStreamingOracle;
  bool pass = true;
  std::size_t cases = 0;
  double max_deviation = 0;  // largest |difference| where equality was required
  std::string failure;       // first failing case, empty on PASS
};

struct VerifyReport {
  Dtype dtype = Dtype::kF64;
  double tolerance = 0;
  std::vector<SuiteResult> suites;

  bool pass() const;
};

// Max abs deviation allowed between streaming and clip outputs.
double equivalence_tolerance(Dtype dtype);

SuiteResult run_suite(VerifySuite suite, const RunConfig& config, const VerifyOptions& options);
VerifyReport run_verify(const RunConfig& config, const VerifyOptions& options,
                        const std::vector<VerifySuite>& suites = {std::begin(kAllSuites),
                                                                  std::end(kAllSuites)});

// PASS/FAIL table followed by a `key=value` block.
std::string format_verify_report(const VerifyReport& report);

}  // namespace svit
