#pragma once

// JSON forms of the tool's inputs and outputs. Objects keep insertion order
// so the emitted documents are stable byte-for-byte; doubles are written in
// the shortest form that parses back to the same value.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dplopt/fitting.hpp"
#include "dplopt/pareto.hpp"
#include "dplopt/presets.hpp"
#include "dplopt/ratio_optimizer.hpp"
#include "dplopt/simulator.hpp"

namespace dplopt {

using Json = nlohmann::ordered_json;

/// Throws ParseError (with the reported line) on malformed JSON.
Json read_json_file(const std::filesystem::path& path);
Json parse_json(std::istream& in);
Json parse_json_text(const std::string& text, const std::string& source);

/// Two-space indent plus a trailing newline.
void write_json(std::ostream& out, const Json& doc);

Json preset_to_json(const Preset& preset);
Preset preset_from_json(const Json& doc);

Json params_to_json(const DplParams& params);
/// Accepts a preset document, a bare params object, or a fit report (its
/// "params" member).
DplParams params_from_json(const Json& doc);

/// [{name, data_size_millions}]
std::vector<DirectionSpec> directions_from_json(const Json& doc);
Json directions_to_json(std::span<const DirectionSpec> directions);

Json fit_report_to_json(const FitReport& report);

Json ratio_solution_to_json(const RatioSolution& solution, std::span<const DirectionSpec> directions);

Json collapse_report_to_json(const CollapseReport& report);

/// {points: [{ratios: [...], losses: [...]}]}
Json sweep_points_to_json(std::span<const SweepPoint> points);
std::vector<SweepPoint> sweep_points_from_json(const Json& doc);

/// Missing fields take the imbalanced defaults. "grid" is either a list of
/// ratio vectors or {swept, lo, hi, step}; "seeds" is a list or a count.
SimConfig sim_config_from_json(const Json& doc);
Json sim_config_to_json(const SimConfig& config);

/// A single config object or {experiments: [config, ...]}.
SimScenario sim_scenario_from_json(const Json& doc);
Json sim_scenario_to_json(const SimScenario& scenario);

/// Per-seed records plus medians.
Json sweep_detail_to_json(const SweepResult& sweep);

}  // namespace dplopt
