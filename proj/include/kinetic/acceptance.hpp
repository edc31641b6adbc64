#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kinetic {

// One literal numeric comparison inside an acceptance item.
struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  std::string relation;  // "<=", "<", ">=" or "=="
  double slack = 0.0;    // absolute arithmetic slack added to the limit
  bool pass = false;
};

struct CriterionResult {
  std::string id;
  std::string title;
  std::string status;  // pass | fail | error
  double measured = 0.0;
  std::string gate;
  std::string artifact_path;
  std::string detail;
  double seconds = 0.0;
  std::vector<Check> checks;
};

struct AcceptanceContext {
  std::string out_dir = "acceptance_out";
  int threads = 1;
  std::uint64_t seed = 7;
};

std::string criterion_title(const std::string& id);
// Runs one item; numerical failures are reported as status "error", never thrown.
CriterionResult run_criterion(const std::string& id, const AcceptanceContext& ctx);

}  // namespace kinetic
