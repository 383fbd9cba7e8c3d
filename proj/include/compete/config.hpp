#ifndef COMPETE_CONFIG_HPP_
#define COMPETE_CONFIG_HPP_

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "compete/orchestrator.hpp"

namespace compete {

// Command-line / config problems; the CLI maps these to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridRequest {
  std::vector<std::string> modes;
  std::vector<int> agent_counts;
};

struct LoadedConfig {
  ExperimentSpec spec;
  std::optional<GridRequest> grid;
};

// Parses a JSON experiment config. Every key is optional with documented
// defaults; unknown keys are rejected. Throws UsageError on any problem.
LoadedConfig parse_config(const std::string& json_text);
LoadedConfig load_config_file(const std::string& path);

// Serializes the fully-merged spec; the result parses back to an identical
// spec (written next to results for provenance).
std::string config_to_json(const ExperimentSpec& spec,
                           const std::optional<GridRequest>& grid = {});

void write_effective_config(const ExperimentSpec& spec,
                            const std::optional<GridRequest>& grid = {});

}  // namespace compete

#endif  // COMPETE_CONFIG_HPP_
