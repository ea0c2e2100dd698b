#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dplopt/dpl_model.hpp"

namespace dplopt {

/// A shipped parameter set (no biases).
struct Preset {
  std::string label;
  DplParams params;
};

/// Compiled-in presets: base, medium, large and base-x-to-en.
const std::vector<Preset>& builtin_presets();

/// Reads every *.json preset document in `dir`, sorted by file name.
std::vector<Preset> load_preset_dir(const std::filesystem::path& dir);

/// Presets from $DPLOPT_PRESET_DIR when set, otherwise the built-ins.
std::vector<Preset> available_presets();

/// Throws Error listing the available labels when `label` is unknown.
Preset find_preset(const std::string& label);

}  // namespace dplopt
