#pragma once

#include <string>
#include <vector>

namespace xmt {

struct SelftestCase {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Seeded finite-difference checks of the autodiff primitives plus the
/// closed-form Fréchet cases.
std::vector<SelftestCase> run_selftest();

}  // namespace xmt
