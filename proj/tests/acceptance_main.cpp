// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [--cli PATH] [--work-dir DIR] [id ...]

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "acceptance_suite.hpp"

#ifndef VWB_CLI_PATH
#define VWB_CLI_PATH ""
#endif

int main(int argc, char** argv) {
  vwb::acceptance::Options opt;
  opt.cli_path = VWB_CLI_PATH;
  opt.work_dir = std::filesystem::temp_directory_path() / "vwb_acceptance";
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc)
      opt.cli_path = argv[++i];
    else if (a == "--work-dir" && i + 1 < argc)
      opt.work_dir = argv[++i];
    else
      ids.push_back(std::atoi(a.c_str()));
  }
  if (ids.empty())
    for (int i = 1; i <= vwb::acceptance::criterion_count(); ++i) ids.push_back(i);
  std::filesystem::create_directories(opt.work_dir);

  int failed = 0;
  for (int id : ids) {
    auto r = vwb::acceptance::run_criterion(id, opt);
    std::cout << vwb::acceptance::format_line(r) << std::endl;
    if (!r.pass) ++failed;
  }
  std::cout << ids.size() - failed << " of " << ids.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
