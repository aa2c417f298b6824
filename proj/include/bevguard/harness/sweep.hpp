#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevguard/harness/pipeline.hpp"
#include "bevguard/harness/scenario.hpp"

namespace bevguard::harness {

struct SweepAxis {
  std::string key;  // dotted config path
  std::vector<nlohmann::json> values;
};

/// Parses "key=v1,v2,..." (each value parsed as JSON, falling back to a string).
SweepAxis parse_axis(const std::string& spec);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single seed
};
MeanStd mean_std(const std::vector<double>& v);

struct SweepRow {
  std::vector<nlohmann::json> values;  // one per axis
  std::vector<EvalReport> reports;     // one per seed
  MeanStd ap50, ap70, f1, fdr;
};

struct SweepResult {
  std::vector<SweepAxis> axes;
  std::vector<SweepRow> rows;
};

/// Called with the config of every cell before it runs; may rewrite resource paths.
using CellHook = std::function<void(ScenarioConfig&)>;

/// Cross product of the axes, each cell run on every seed. Cells and seeds run on `threads`
/// workers; results are ordered by cell then seed regardless of scheduling.
SweepResult run_sweep(const nlohmann::json& base, const std::vector<SweepAxis>& axes,
                      const std::vector<std::uint64_t>& seeds, ResourceCache& resources, unsigned threads,
                      const CellHook& hook = {});

/// One row per cell: axis values, seed count, then mean and std of AP@0.5, AP@0.7, F1, FDR.
void write_sweep_csv(const SweepResult& r, std::ostream& out);

/// Runs independent jobs on a fixed number of worker threads.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job);

}  // namespace bevguard::harness
