#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mecslice/baselines.hpp"
#include "mecslice/harness.hpp"
#include "mecslice/orchestrator.hpp"
#include "mecslice/scenario.hpp"

namespace {

using mecslice::HarnessError;
using nlohmann::json;

json read_document(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw mecslice::ParseError(path + ": cannot open file");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw mecslice::ParseError(path + ": malformed JSON");
  return doc;
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const std::string& item : items) {
    std::stringstream ss(item);
    for (std::string part; std::getline(ss, part, ',');)
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::vector<mecslice::SchemeId> parse_schemes(const std::vector<std::string>& names) {
  std::vector<mecslice::SchemeId> out;
  for (const std::string& n : split_list(names)) {
    const auto id = mecslice::parse_scheme(n);
    if (!id) throw HarnessError("unknown scheme '" + n + "'");
    out.push_back(*id);
  }
  return out;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-")
    std::cout << content;
  else
    mecslice::write_file_atomic(out_path, content);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay minimization for sliced multi-cell MEC networks"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, axis = "users_per_cell";
  std::vector<std::string> overrides, schemes, values, seeds;
  std::uint64_t seed = 1;

  auto* gen = app.add_subcommand("generate", "Generate a scenario and write it in explicit form");
  gen->add_option("--scenario", scenario_path, "Generator document (defaults when omitted)");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--out", out_path, "Output file (stdout when omitted)");
  gen->add_option("--config-override", overrides, "key.path=value, repeatable");

  auto* solve = app.add_subcommand("solve", "Solve one scenario with one scheme");
  solve->add_option("--scenario", scenario_path, "Scenario document (defaults when omitted)");
  solve->add_option("--scheme", schemes, "PROPOSED, JOCRA, JSPRA or NO_COOP");
  auto* solve_seed = solve->add_option("--seed", seed, "Scenario seed for generator documents");
  solve->add_option("--out", out_path,
                    "Solution JSON (stdout when omitted); the trace goes to <out>.trace.csv");
  solve->add_option("--config-override", overrides, "key.path=value, repeatable");

  auto* sweep = app.add_subcommand("sweep", "Run a (value, seed, scheme) grid");
  sweep->add_option("--scenario", scenario_path, "Base generator document");
  sweep->add_option("--axis", axis, "users_per_cell, num_cells or iterations");
  sweep->add_option("--values", values, "Axis values, comma separated")->required();
  sweep->add_option("--scheme", schemes, "Schemes, comma separated (all when omitted)");
  sweep->add_option("--seed", seeds, "Seeds, comma separated (1..10 when omitted)");
  sweep->add_option("--out", out_path, "Output directory")->required();
  sweep->add_option("--config-override", overrides, "key.path=value, repeatable");

  auto* rep = app.add_subcommand("report", "Summarize a sweep directory");
  rep->add_option("--out", out_path, "Sweep directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      std::vector<std::string> ov = overrides;
      ov.push_back("seed=" + std::to_string(seed));
      const mecslice::Scenario s = mecslice::parse_scenario(read_document(scenario_path), ov);
      emit(out_path, mecslice::scenario_to_json(s).dump(1) + "\n");
      return 0;
    }

    if (solve->parsed()) {
      std::vector<std::string> ov = overrides;
      if (solve_seed->count() > 0) ov.push_back("seed=" + std::to_string(seed));
      const mecslice::Scenario s = mecslice::parse_scenario(read_document(scenario_path), ov);
      std::vector<mecslice::SchemeId> ids = parse_schemes(schemes);
      if (ids.size() > 1) throw HarnessError("solve takes one scheme");
      const mecslice::SchemeId id = ids.empty() ? mecslice::SchemeId::kProposed : ids.front();
      mecslice::SolveOptions opts;
      opts.seed = s.rng_seed();
      const mecslice::Solution sol = mecslice::run_scheme(s, id, opts);
      emit(out_path, mecslice::solution_to_json(s, sol).dump(1) + "\n");
      if (!out_path.empty() && out_path != "-") {
        std::ostringstream trace;
        mecslice::write_trace_csv(trace, sol.trace);
        mecslice::write_file_atomic(out_path + ".trace.csv", trace.str());
        std::cerr << mecslice::scheme_name(id) << " objective " << sol.objective << '\n';
      }
      return 0;
    }

    if (sweep->parsed()) {
      mecslice::SweepSpec spec;
      const auto parsed_axis = mecslice::parse_axis(axis);
      if (!parsed_axis) throw HarnessError("unknown axis '" + axis + "'");
      spec.axis = *parsed_axis;
      for (const std::string& v : split_list(values)) {
        try {
          spec.values.push_back(std::stod(v));
        } catch (const std::exception&) {
          throw HarnessError("axis value '" + v + "' is not a number");
        }
      }
      if (!schemes.empty()) spec.schemes = parse_schemes(schemes);
      if (!seeds.empty()) {
        spec.seeds.clear();
        for (const std::string& v : split_list(seeds)) {
          try {
            spec.seeds.push_back(std::stoull(v));
          } catch (const std::exception&) {
            throw HarnessError("seed '" + v + "' is not an unsigned integer");
          }
        }
      }
      spec.base = read_document(scenario_path);
      spec.overrides = overrides;
      const mecslice::SweepSummary summary =
          mecslice::run_sweep(spec, out_path, mecslice::workers_from_env());
      std::ostringstream agg;
      mecslice::write_aggregate_csv(agg, summary.aggregate);
      std::cout << agg.str();
      for (const mecslice::CellFailure& f : summary.failures)
        std::cerr << "failed: " << axis << '=' << f.axis_value << " seed=" << f.seed << ' '
                  << f.scheme << ": " << f.error << '\n';
      return summary.failures.empty() ? 0 : 2;
    }

    if (rep->parsed()) {
      std::cout << mecslice::report(out_path);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
