#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "runner.hpp"

namespace vwb::run {

struct GlobalOptions {
  std::filesystem::path config;  // empty: the subcommand must not need one
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::filesystem::path out_dir = ".";
  bool reproducible = false;
  std::filesystem::path resume;  // checkpoint to continue from
  std::int64_t stop_after = 0;   // stop once this many sweeps or steps are done, 0 runs to the end
};

const std::vector<std::string>& subcommand_names();
const Schema& schema_for(const std::string& subcommand);
// schema listing with documentation, as printed by --help-config
std::string describe_schema(const Schema& schema);

// Returns the process exit status.
int run_subcommand(const std::string& subcommand, const GlobalOptions& opt);

}  // namespace vwb::run
