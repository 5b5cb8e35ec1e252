#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mecslice/baselines.hpp"
#include "mecslice/orchestrator.hpp"

namespace mecslice {

/// What a sweep varies.
///   users_per_cell  network.users_per_cell of the generated scenario
///   num_cells       network.num_cells of the generated scenario
///   iterations      the outer iteration cap of the solver
enum class SweepAxis { kUsersPerCell, kNumCells, kIterations };

std::string_view axis_name(SweepAxis axis);
std::optional<SweepAxis> parse_axis(std::string_view name);

/// Ten seeds, 1..10.
std::vector<std::uint64_t> default_seeds();

struct SweepSpec {
  SweepAxis axis = SweepAxis::kUsersPerCell;
  std::vector<double> values;
  std::vector<SchemeId> schemes = all_schemes();
  std::vector<std::uint64_t> seeds = default_seeds();
  /// Generator document (see docs/scenario-format.md); the scenario seed is
  /// replaced by each sweep seed.
  nlohmann::json base = nlohmann::json::object();
  std::vector<std::string> overrides;
  SolveOptions options;
};

struct AggregateRow {
  double axis_value = 0.0;
  std::string scheme;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single seed
  std::size_t count = 0;
};

struct CellFailure {
  double axis_value = 0.0;
  std::uint64_t seed = 0;
  std::string scheme;
  std::string error;
};

struct SweepSummary {
  std::size_t cells = 0;
  std::vector<CellFailure> failures;
  std::vector<AggregateRow> aggregate;
};

/// Raised for unusable sweep specs and unreadable result directories.
class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs every (value, seed, scheme) cell on `workers` threads. Per cell it
/// writes solutions/<stem>.json and traces/<stem>.csv; then aggregate.csv,
/// manifest.json (spec and failures) and, for the iterations axis,
/// convergence.csv. Files are written to a temporary name and renamed.
/// A failing cell is recorded and never stops the others.
SweepSummary run_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir,
                       unsigned workers = 1);

/// Worker count from MECSLICE_WORKERS (default 1, at least 1).
unsigned workers_from_env();

/// Mean and sample standard deviation per (axis value, scheme) over the
/// solution files of a sweep directory, ordered by value then scheme.
std::vector<AggregateRow> aggregate_results(const std::filesystem::path& out_dir);

/// Text tables per axis value with the mean % increase of every other
/// scheme over PROPOSED. Throws HarnessError on an empty directory or a
/// corrupt file (named in the message).
std::string report(const std::filesystem::path& out_dir);

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace mecslice
