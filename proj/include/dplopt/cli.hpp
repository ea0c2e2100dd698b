#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dplopt/observations.hpp"
#include "dplopt/pareto.hpp"

namespace dplopt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitFlagged = 2;

/// Runs one `dplopt` invocation in-process. `args` excludes the program
/// name. Results go to `out` unless --output is given; diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Sweep points from observation rows. Rows sharing a point_id form one
/// point; without ids, consecutive blocks of one row per direction do.
/// Directions are ordered by first appearance.
std::vector<SweepPoint> sweep_points_from_observations(std::span<const Observation> observations);

}  // namespace dplopt
