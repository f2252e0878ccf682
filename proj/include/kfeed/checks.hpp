#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kfeed {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Oracle and invariant checks on small random instances; prints one line per check.
std::vector<CheckResult> run_self_checks(std::ostream& out, unsigned long long seed = 1);

}  // namespace kfeed
