// Runs the full acceptance-criteria suite and prints one pass/fail line per
// criterion; exits nonzero when any criterion fails.

#include <iostream>

#include "coherdist/cli.hpp"

int main() {
  coherdist::cli::VerifyConfig cfg;
  cfg.full = true;
  cfg.seed = 1;
  const int failures = coherdist::cli::run_verification(cfg, std::cout);
  if (failures != 0) {
    std::cout << failures << " criteria failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
