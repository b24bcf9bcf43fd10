#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maskrl::harness {

struct SuiteResult {
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 2026;
  // Test fixture: perturbs one analytic gradient coordinate so the
  // finite-difference suite must fail. Exists to prove the suite can fail.
  bool corrupt_gradient = false;
};

// Runs every oracle suite: finite differences, estimator enumeration,
// gradient equivalences, trajectory replay, IoU brute force, and the
// reward-service loopback. Failures are entries in the report, not
// exceptions.
std::vector<SuiteResult> verify(const VerifyOptions& opts = {});

std::string verify_report_json(const std::vector<SuiteResult>& results);

bool all_passed(const std::vector<SuiteResult>& results);

}  // namespace maskrl::harness
