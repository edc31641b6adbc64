// Acceptance battery: one PASS/FAIL line per criterion, manifest.json in the output directory.
#include "kinetic/acceptance.hpp"
#include "kinetic/config.hpp"
#include "kinetic/csv.hpp"
#include "kinetic/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace kinetic;

int main(int argc, char** argv) {
  CLI::App app{"Acceptance battery"};
  AcceptanceContext ctx;
  std::vector<std::string> only;
  app.add_option("--out-dir", ctx.out_dir, "artifact directory");
  app.add_option("--threads", ctx.threads)->check(CLI::PositiveNumber);
  app.add_option("--seed", ctx.seed);
  app.add_option("--only", only, "comma-separated criterion ids")->delimiter(',');
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::vector<std::string> ids = only.empty() ? all_criteria() : only;
  for (const auto& id : ids) {
    try {
      criterion_title(id);
    } catch (const std::exception&) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
  }
  std::filesystem::create_directories(ctx.out_dir);
  std::vector<ManifestEntry> entries;
  bool all = true;
  for (const auto& id : ids) {
    const CriterionResult r = run_criterion(id, ctx);
    all = all && r.status == "pass";
    const char* tag = r.status == "pass" ? "PASS" : r.status == "fail" ? "FAIL" : "ERROR";
    std::printf("%-4s %-5s %-32s measured=%s gate: %s (%.1f s)%s%s\n", r.id.c_str(), tag, r.title.c_str(),
                format_number(r.measured).c_str(), r.gate.c_str(), r.seconds, r.detail.empty() ? "" : " ",
                r.detail.c_str());
    std::fflush(stdout);
    entries.push_back({r.id, r.status, r.measured, r.gate, r.artifact_path, r.detail});
  }
  write_manifest((std::filesystem::path(ctx.out_dir) / "manifest.json").string(), entries, "acceptance");
  return all ? 0 : 1;
}
