#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "parmatch/config.hpp"
#include "parmatch/data_service.hpp"
#include "parmatch/engine.hpp"

namespace parmatch {

// Loads every configured input into the store; throws LoadError/ConfigError.
void load_inputs(const RunConfig& config, DataStore& store);

// Builds the partition plan for the configured mode and sources. Two
// duplicate-free sources are partitioned separately (ids prefixed with the
// source label) and paired cross-source; otherwise the union of loaded
// entities flows through single-source planning.
PartitionPlan build_plan(const RunConfig& config, const DataStore& store);

// Plan report as JSON (partition table + task table).
std::string plan_to_json(const PartitionPlan& plan);
// Human-readable tables for --dry-run.
void write_plan_tables(std::ostream& out, const PartitionPlan& plan);

// Sorted `idA,idB,sim` rows, sim with 6 decimal digits.
void write_correspondences(std::ostream& out,
                           std::span<const Correspondence> correspondences);

struct RunArtifacts {
  RunOutcome outcome;
  PartitionPlan plan;
  std::string result_file;
  std::string metrics_file;
  std::string plan_file;
  std::string trace_file;
};

// Full in-process workflow: load, validate, plan, execute, write the
// result/metrics/plan/trace artifacts into config.out_dir. With dry_run
// set, stops after writing the plan report.
RunArtifacts run_from_config(const RunConfig& config);

struct SpeedupRow {
  std::uint32_t threads = 0;
  double elapsed_seconds = 0.0;
  double speedup = 0.0;
};

// Runs the identical plan once per thread count on one worker and reports
// elapsed(1)/elapsed(t). Verifies that every run produces the same
// correspondence set.
std::vector<SpeedupRow> speedup_experiment(
    const RunConfig& config, const std::vector<std::uint32_t>& thread_counts,
    std::ostream& log);

}  // namespace parmatch
