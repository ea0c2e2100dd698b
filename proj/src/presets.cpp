#include "dplopt/presets.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "dplopt/error.hpp"
#include "dplopt/json_io.hpp"

namespace dplopt {
namespace {

Preset make(std::string label, double alpha, double beta, double gamma) {
  Preset p;
  p.label = std::move(label);
  p.params.k = 0.07;
  p.params.alpha = alpha;
  p.params.q = 1.18;
  p.params.beta = beta;
  p.params.gamma = gamma;
  p.params.b = -0.50;
  return p;
}

}  // namespace

const std::vector<Preset>& builtin_presets() {
  // Larger models keep k, q, gamma and b and only change the power terms.
  static const std::vector<Preset> presets = {
      make("base", 0.20, 1.21, -0.33),
      make("medium", 0.25, 2.41, -0.33),
      make("large", 0.27, 3.43, -0.33),
      make("base-x-to-en", 0.20, 1.21, -0.25),
  };
  return presets;
}

std::vector<Preset> load_preset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error("preset directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Preset> presets;
  for (const auto& file : files) {
    presets.push_back(preset_from_json(read_json_file(file)));
  }
  return presets;
}

std::vector<Preset> available_presets() {
  if (const char* dir = std::getenv("DPLOPT_PRESET_DIR"); dir && *dir) {
    return load_preset_dir(dir);
  }
  return builtin_presets();
}

Preset find_preset(const std::string& label) {
  const auto presets = available_presets();
  for (const auto& p : presets) {
    if (p.label == label) return p;
  }
  std::string known;
  for (const auto& p : presets) known += (known.empty() ? "" : ", ") + p.label;
  throw Error("unknown preset '" + label + "'; available presets: " + known);
}

}  // namespace dplopt
