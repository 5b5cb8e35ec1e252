#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mecslice/orchestrator.hpp"

namespace mecslice {

enum class SchemeId { kProposed, kJocra, kJspra, kNoCoop };

std::string_view scheme_name(SchemeId id);
/// Accepts PROPOSED, JOCRA, JSPRA, NO_COOP (case-insensitive).
std::optional<SchemeId> parse_scheme(std::string_view name);
const std::vector<SchemeId>& all_schemes();

/// Offloading and compute optimized; X and P frozen at round_robin_assignment.
/// The frozen plan is the same for every seed of a scenario.
Solution solve_jocra(const Scenario& s, const SolveOptions& opts = {});

/// Offloading, subchannels and power optimized; every user of slice k gets
/// beta_k S^E / (|U_k| M) on every server, frozen.
Solution solve_jspra(const Scenario& s, const SolveOptions& opts = {});

/// The joint scheme restricted to local and serving-server execution.
Solution solve_no_coop(const Scenario& s, const SolveOptions& opts = {});

Solution run_scheme(const Scenario& s, SchemeId id, const SolveOptions& opts = {});

}  // namespace mecslice
