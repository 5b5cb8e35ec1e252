#include "mecslice/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace mecslice {

std::string_view scheme_name(SchemeId id) {
  switch (id) {
    case SchemeId::kProposed: return "PROPOSED";
    case SchemeId::kJocra: return "JOCRA";
    case SchemeId::kJspra: return "JSPRA";
    case SchemeId::kNoCoop: return "NO_COOP";
  }
  return "UNKNOWN";
}

std::optional<SchemeId> parse_scheme(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (SchemeId id : all_schemes())
    if (scheme_name(id) == upper) return id;
  return std::nullopt;
}

const std::vector<SchemeId>& all_schemes() {
  static const std::vector<SchemeId> ids = {SchemeId::kProposed, SchemeId::kJocra,
                                            SchemeId::kJspra, SchemeId::kNoCoop};
  return ids;
}

Solution solve_jocra(const Scenario& s, const SolveOptions& opts) {
  SolveOptions o = opts;
  o.cooperation = true;
  Solution sol = solve_from(s, round_robin_assignment(s, ComputeSplit::kAllServers), o,
                            BlockMask::compute_only());
  sol.scheme = "JOCRA";
  sol.frozen = "X and P from round_robin_assignment: cyclic subchannels per cell, "
               "P_max spread evenly over the held subchannels";
  return sol;
}

Solution solve_jspra(const Scenario& s, const SolveOptions& opts) {
  SolveOptions o = opts;
  o.cooperation = true;
  Solution sol = solve_from(s, fair_share_init(s, ComputeSplit::kAllServers), o,
                            BlockMask::ran_only());
  sol.scheme = "JSPRA";
  sol.frozen = "F equal split: beta_k S^E / (|U_k| M) per user and server";
  return sol;
}

Solution solve_no_coop(const Scenario& s, const SolveOptions& opts) {
  SolveOptions o = opts;
  o.cooperation = false;
  return solve(s, o);
}

Solution run_scheme(const Scenario& s, SchemeId id, const SolveOptions& opts) {
  switch (id) {
    case SchemeId::kProposed: {
      SolveOptions o = opts;
      o.cooperation = true;
      return solve(s, o);
    }
    case SchemeId::kJocra: return solve_jocra(s, opts);
    case SchemeId::kJspra: return solve_jspra(s, opts);
    case SchemeId::kNoCoop: return solve_no_coop(s, opts);
  }
  return solve(s, opts);
}

}  // namespace mecslice
