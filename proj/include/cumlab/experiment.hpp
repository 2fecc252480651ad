#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cumlab {

using json = nlohmann::json;

std::string version_string();

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode { kExitOk = 0, kExitPartialFailure = 1, kExitConfigError = 2 };

struct RunOptions {
  std::string out_dir = ".";
  int jobs = 1;
  std::optional<std::uint64_t> seed_override;
  // Empty means every grid point.
  std::vector<int> only_points;
};

// Ordered (name, value) pairs identifying one grid point.
using Coords = std::vector<std::pair<std::string, std::string>>;

std::uint64_t point_seed(std::uint64_t root, const std::string& experiment, const Coords& coords);

const std::vector<std::string>& experiment_kinds();

// Runs one experiment kind and writes its outputs under opts.out_dir.
// Returns an ExitCode; throws ConfigError for invalid configs.
int run_experiment(const std::string& kind, const json& config, const RunOptions& opts);

// Aggregates every metric listed in the manifest into plot_<metric>.csv.
int emit_plotdata(const std::string& results_dir);

std::optional<std::uint64_t> seed_from_env();

}  // namespace cumlab
