#include "mecslice/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <thread>
#include <utility>

namespace mecslice {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(15) << v;
  return os.str();
}

std::string cell_stem(SweepAxis axis, double value, std::uint64_t seed,
                      std::string_view scheme) {
  return std::string(axis_name(axis)) + "=" + format_value(value) + "_seed=" +
         std::to_string(seed) + "_" + std::string(scheme);
}

struct CellJob {
  double value;
  std::uint64_t seed;
  SchemeId scheme;
};

struct CellResult {
  bool ok = false;
  double objective = 0.0;
  std::vector<double> history;
  std::string error;
};

Scenario cell_scenario(const SweepSpec& spec, double value, std::uint64_t seed) {
  std::vector<std::string> ov = spec.overrides;
  ov.push_back("seed=" + std::to_string(seed));
  const long count = std::lround(value);
  if (spec.axis == SweepAxis::kUsersPerCell)
    ov.push_back("network.users_per_cell=" + std::to_string(count));
  else if (spec.axis == SweepAxis::kNumCells)
    ov.push_back("network.num_cells=" + std::to_string(count));
  return parse_scenario(spec.base, ov);
}

void aggregate_into(std::vector<AggregateRow>& out, double value, std::string scheme,
                    const std::vector<double>& objs) {
  if (objs.empty()) return;  // every seed failed; the manifest lists them
  AggregateRow row;
  row.axis_value = value;
  row.scheme = std::move(scheme);
  row.count = objs.size();
  double sum = 0.0;
  for (double o : objs) sum += o;
  row.mean = sum / static_cast<double>(objs.size());
  if (objs.size() > 1) {
    double ss = 0.0;
    for (double o : objs) ss += (o - row.mean) * (o - row.mean);
    row.std = std::sqrt(ss / static_cast<double>(objs.size() - 1));
  }
  out.push_back(row);
}

int scheme_rank(const std::string& name) {
  const auto id = parse_scheme(name);
  return id ? static_cast<int>(*id) : 100;
}

}  // namespace

std::string_view axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kUsersPerCell: return "users_per_cell";
    case SweepAxis::kNumCells: return "num_cells";
    case SweepAxis::kIterations: return "iterations";
  }
  return "unknown";
}

std::optional<SweepAxis> parse_axis(std::string_view name) {
  for (SweepAxis a : {SweepAxis::kUsersPerCell, SweepAxis::kNumCells, SweepAxis::kIterations})
    if (axis_name(a) == name) return a;
  return std::nullopt;
}

std::vector<std::uint64_t> default_seeds() {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
  return seeds;
}

unsigned workers_from_env() {
  const char* raw = std::getenv("MECSLICE_WORKERS");
  if (!raw) return 1;
  char* end = nullptr;
  const long n = std::strtol(raw, &end, 10);
  if (end == raw || n < 1) return 1;
  return static_cast<unsigned>(n);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw HarnessError(tmp.string() + ": cannot open for writing");
    out << content;
    if (!out) throw HarnessError(tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "axis_value,scheme,mean,std,n\n";
  out << std::setprecision(17);
  for (const AggregateRow& r : rows)
    out << format_value(r.axis_value) << ',' << r.scheme << ',' << r.mean << ','
        << r.std << ',' << r.count << '\n';
}

SweepSummary run_sweep(const SweepSpec& spec, const fs::path& out_dir, unsigned workers) {
  if (spec.values.empty()) throw HarnessError("sweep: no axis values");
  if (spec.seeds.empty()) throw HarnessError("sweep: no seeds");
  if (spec.schemes.empty()) throw HarnessError("sweep: no schemes");
  for (double v : spec.values)
    if (!(v >= 1.0) || std::abs(v - std::round(v)) > 1e-9)
      throw HarnessError("sweep: axis value " + format_value(v) +
                         " is not a positive integer");

  std::vector<CellJob> jobs;
  for (double v : spec.values)
    for (std::uint64_t seed : spec.seeds)
      for (SchemeId id : spec.schemes) jobs.push_back({v, seed, id});

  fs::create_directories(out_dir / "solutions");
  fs::create_directories(out_dir / "traces");

  std::vector<CellResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const CellJob& job = jobs[i];
      CellResult& res = results[i];
      const std::string stem =
          cell_stem(spec.axis, job.value, job.seed, scheme_name(job.scheme));
      try {
        const Scenario s = cell_scenario(spec, job.value, job.seed);
        SolveOptions opts = spec.options;
        opts.seed = job.seed;
        if (spec.axis == SweepAxis::kIterations) opts.outer_cap = static_cast<int>(job.value);
        const Solution sol = run_scheme(s, job.scheme, opts);

        json doc = solution_to_json(s, sol);
        doc["axis"] = axis_name(spec.axis);
        doc["axis_value"] = job.value;
        write_file_atomic(out_dir / "solutions" / (stem + ".json"), doc.dump(1) + "\n");
        std::ostringstream trace;
        write_trace_csv(trace, sol.trace);
        write_file_atomic(out_dir / "traces" / (stem + ".csv"), trace.str());

        res.objective = sol.objective;
        res.history = sol.objective_history;
        res.ok = true;
      } catch (const std::exception& e) {
        res.error = e.what();
      }
    }
  };
  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  SweepSummary summary;
  summary.cells = jobs.size();
  // Jobs are ordered by value, seed, scheme, so each group reduces in seed
  // order regardless of which worker finished first.
  for (double v : spec.values) {
    for (SchemeId id : spec.schemes) {
      std::vector<double> objs;
      for (std::size_t i = 0; i < jobs.size(); ++i)
        if (jobs[i].value == v && jobs[i].scheme == id && results[i].ok)
          objs.push_back(results[i].objective);
      aggregate_into(summary.aggregate, v, std::string(scheme_name(id)), objs);
    }
  }
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (!results[i].ok)
      summary.failures.push_back({jobs[i].value, jobs[i].seed,
                                  std::string(scheme_name(jobs[i].scheme)),
                                  results[i].error});

  std::ostringstream agg;
  write_aggregate_csv(agg, summary.aggregate);
  write_file_atomic(out_dir / "aggregate.csv", agg.str());

  if (spec.axis == SweepAxis::kIterations) {
    std::size_t width = 0;
    for (const CellResult& r : results) width = std::max(width, r.history.size());
    std::ostringstream conv;
    conv << "axis_value,scheme,seed";
    for (std::size_t k = 1; k <= width; ++k) conv << ",iter_" << k;
    conv << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (!results[i].ok) continue;
      conv << format_value(jobs[i].value) << ',' << scheme_name(jobs[i].scheme) << ','
           << jobs[i].seed;
      for (std::size_t k = 0; k < width; ++k) {
        conv << ',';
        if (k < results[i].history.size()) conv << results[i].history[k];
      }
      conv << '\n';
    }
    write_file_atomic(out_dir / "convergence.csv", conv.str());
  }

  json manifest;
  manifest["axis"] = axis_name(spec.axis);
  manifest["values"] = spec.values;
  manifest["seeds"] = spec.seeds;
  json schemes = json::array();
  for (SchemeId id : spec.schemes) schemes.push_back(scheme_name(id));
  manifest["schemes"] = schemes;
  manifest["base"] = spec.base;
  manifest["overrides"] = spec.overrides;
  manifest["cells"] = summary.cells;
  json failures = json::array();
  for (const CellFailure& f : summary.failures)
    failures.push_back({{"axis_value", f.axis_value},
                        {"seed", f.seed},
                        {"scheme", f.scheme},
                        {"error", f.error}});
  manifest["failures"] = failures;
  write_file_atomic(out_dir / "manifest.json", manifest.dump(1) + "\n");
  return summary;
}

namespace {

struct StoredResult {
  std::string axis;
  double axis_value = 0.0;
  std::string scheme;
  std::uint64_t seed = 0;
  double objective = 0.0;
};

std::vector<StoredResult> load_results(const fs::path& out_dir) {
  const fs::path dir = out_dir / "solutions";
  if (!fs::is_directory(dir))
    throw HarnessError("no results: " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  if (files.empty()) throw HarnessError("no results in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<StoredResult> out;
  for (const fs::path& p : files) {
    std::ifstream in(p);
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      throw HarnessError("corrupt result file " + p.string() + ": malformed JSON");
    StoredResult r;
    try {
      r.axis = doc.at("axis").get<std::string>();
      r.axis_value = doc.at("axis_value").get<double>();
      r.scheme = doc.at("scheme").get<std::string>();
      r.seed = doc.at("seed").get<std::uint64_t>();
      // Infinite objectives are stored as null.
      const json& o = doc.at("objective");
      r.objective = o.is_null() ? std::numeric_limits<double>::infinity() : o.get<double>();
    } catch (const json::exception& e) {
      throw HarnessError("corrupt result file " + p.string() + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<AggregateRow> aggregate_results(const fs::path& out_dir) {
  std::vector<StoredResult> stored = load_results(out_dir);
  std::sort(stored.begin(), stored.end(), [](const StoredResult& a, const StoredResult& b) {
    if (a.axis_value != b.axis_value) return a.axis_value < b.axis_value;
    if (a.scheme != b.scheme)
      return std::make_pair(scheme_rank(a.scheme), a.scheme) <
             std::make_pair(scheme_rank(b.scheme), b.scheme);
    return a.seed < b.seed;
  });
  std::vector<AggregateRow> rows;
  for (std::size_t i = 0; i < stored.size();) {
    std::size_t j = i;
    std::vector<double> objs;
    while (j < stored.size() && stored[j].axis_value == stored[i].axis_value &&
           stored[j].scheme == stored[i].scheme)
      objs.push_back(stored[j++].objective);
    aggregate_into(rows, stored[i].axis_value, stored[i].scheme, objs);
    i = j;
  }
  return rows;
}

std::string report(const fs::path& out_dir) {
  const std::vector<StoredResult> stored = load_results(out_dir);
  const std::vector<AggregateRow> rows = aggregate_results(out_dir);
  std::map<std::string, int> schemes;
  for (const AggregateRow& r : rows) schemes[r.scheme] = scheme_rank(r.scheme);
  const bool gaps = schemes.size() > 1 && schemes.count("PROPOSED") > 0;

  std::ostringstream os;
  os << "axis: " << stored.front().axis << '\n';
  os << std::left << std::setw(12) << "value" << std::setw(10) << "scheme" << std::right
     << std::setw(14) << "mean" << std::setw(12) << "std" << std::setw(5) << "n";
  if (gaps) os << std::setw(16) << "vs PROPOSED %";
  os << '\n';
  os << std::fixed;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AggregateRow& r = rows[i];
    const AggregateRow* base = nullptr;
    for (const AggregateRow& q : rows)
      if (q.axis_value == r.axis_value && q.scheme == "PROPOSED") base = &q;
    os << std::left << std::setw(12) << format_value(r.axis_value) << std::setw(10) << r.scheme
       << std::right << std::setprecision(4) << std::setw(14) << r.mean << std::setw(12)
       << r.std << std::setw(5) << r.count;
    if (gaps) {
      if (base && r.scheme != "PROPOSED" && base->mean != 0.0)
        os << std::setw(16) << std::setprecision(2)
           << 100.0 * (r.mean - base->mean) / std::abs(base->mean);
      else
        os << std::setw(16) << "-";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace mecslice
