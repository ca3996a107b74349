// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is nonzero when any criterion fails.

#include <cstdio>
#include <iostream>

#include "segfb/acceptance.hpp"

int main() {
  const segfb::AcceptanceOptions opt;
  int failed = 0;
  for (const auto check : segfb::acceptance_checks()) {
    const auto r = check(opt);
    std::cout << segfb::format_result_line(r) << std::endl;
    if (!r.passed) ++failed;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
