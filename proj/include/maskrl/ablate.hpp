#pragma once

#include "maskrl/config.hpp"

#include <string>
#include <vector>

namespace maskrl::harness {

// One grid entry: a name plus a JSON object of RunConfig overrides.
struct AblationSpec {
  std::string name;
  std::string overrides_json;
};

// Parses a grid file: {"base": {...}, "runs": [{"name": .., "overrides":
// {...}}, ...]}. The base object overrides defaults for every run.
std::vector<AblationSpec> load_ablation_grid(const std::string& path,
                                             RunConfig& base);

// Runs every configuration to its step budget and merges the per-step
// metrics into one comparison CSV: config,<metrics columns>. Each run's own
// metrics file lands next to the comparison file.
std::string ablation_run(const RunConfig& base,
                         const std::vector<AblationSpec>& grid,
                         const std::string& out_csv);

// Applies a JSON override object on top of a config.
RunConfig apply_overrides(const RunConfig& base, const std::string& overrides);

}  // namespace maskrl::harness
