#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "la/fault.hpp"

namespace la {

// Configuration for the oracle verification suites. The defaults match the
// sizes and case counts the acceptance gate runs at.
struct VerifyOptions {
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = hardware concurrency
  std::size_t forward_cases = 200;
  std::size_t backward_cases = 100;
  std::size_t recurrent_cases = 50;
  std::size_t normalize_cases = 10000;
  Fault fault = Fault::None;
  // Suites to run; empty means all of
  // {forward, backward, recurrent, plan, workspace, normalize}.
  std::vector<std::string> suites;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  double max_dev = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

std::vector<SuiteResult> run_verify(const VerifyOptions& options);

bool all_passed(std::span<const SuiteResult> results);

}  // namespace la
