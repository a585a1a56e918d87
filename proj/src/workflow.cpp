#include "parmatch/workflow.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <ostream>

#include "parmatch/csv.hpp"
#include "parmatch/error.hpp"
#include "parmatch/metrics.hpp"

namespace parmatch {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<WorkerDescriptor> worker_descriptors(const RunConfig& config) {
  std::vector<WorkerDescriptor> out;
  for (std::uint32_t i = 0; i < config.workers; ++i) {
    out.push_back({"w" + std::to_string(i + 1), config.threads,
                   config.cache_capacity});
  }
  return out;
}

void check_blocking_column(const RunConfig& config, const DataStore& store) {
  if (config.mode != PlanMode::BlockingBased) return;
  if (!store.schema_columns().contains(*config.blocking_column)) {
    throw ConfigError("schema.blocking: column '" + *config.blocking_column +
                      "' not present in the input schema");
  }
}

PartitionPlan plan_single_source(const RunConfig& config,
                                 std::span<const Entity> entities,
                                 std::uint64_t m, std::uint64_t min_size,
                                 const std::string& prefix = "") {
  if (config.mode == PlanMode::SizeBased) {
    return size_based_partition(entities, m, config.strategy.id, prefix);
  }
  return blocking_based_partition(entities, *config.blocking_column, m,
                                  min_size, config.strategy.id, prefix);
}

}  // namespace

void load_inputs(const RunConfig& config, DataStore& store) {
  if (config.inputs.empty()) {
    throw ConfigError("input: no input file configured");
  }
  for (const auto& input : config.inputs) {
    std::ifstream in(input.path, std::ios::binary);
    if (!in) throw LoadError("cannot open input file '" + input.path + "'");
    CsvSchema schema;
    schema.id_column = config.id_column;
    schema.delimiter = config.delimiter;
    store.load_entities_csv(in, schema, input.source_id);
  }
}

PartitionPlan build_plan(const RunConfig& config, const DataStore& store) {
  std::uint64_t m = resolve_max_partition_size(config);
  auto min_size =
      static_cast<std::uint64_t>(config.min_size_fraction * static_cast<double>(m));
  check_blocking_column(config, store);

  if (config.inputs.size() == 2 && config.duplicate_free) {
    auto entities_a = store.entities_of_source(config.inputs[0].source_id);
    auto entities_b = store.entities_of_source(config.inputs[1].source_id);
    std::string prefix_a = config.inputs[0].source_id + "/";
    std::string prefix_b = config.inputs[1].source_id + "/";
    PartitionPlan plan_a =
        plan_single_source(config, entities_a, m, min_size, prefix_a);
    PartitionPlan plan_b =
        plan_single_source(config, entities_b, m, min_size, prefix_b);
    PartitionPlan plan;
    plan.mode = config.mode;
    plan.max_partition_size = m;
    plan.min_partition_size = min_size;
    plan.partitions = std::move(plan_a.partitions);
    plan.partitions.insert(plan.partitions.end(),
                           plan_b.partitions.begin(), plan_b.partitions.end());
    plan.tasks = generate_two_source_tasks(
        std::span<const Partition>(plan.partitions.data(),
                                   plan.partitions.size() -
                                       plan_b.partitions.size()),
        plan_b.partitions, true, config.mode, config.strategy.id);
    return plan;
  }

  PartitionPlan plan =
      plan_single_source(config, store.entities(), m, min_size);
  plan.min_partition_size = min_size;
  return plan;
}

std::string plan_to_json(const PartitionPlan& plan) {
  json partitions = json::array();
  for (const auto& p : plan.partitions) {
    json row = {{"id", p.id},
                {"kind", to_string(p.kind)},
                {"size", p.size()}};
    if (p.origin_block_key) row["originBlockKey"] = *p.origin_block_key;
    if (p.split_count > 1) {
      row["splitIndex"] = p.split_index;
      row["splitCount"] = p.split_count;
    }
    if (!p.member_block_keys.empty()) {
      row["memberBlockKeys"] = p.member_block_keys;
    }
    partitions.push_back(std::move(row));
  }
  json tasks = json::array();
  for (const auto& t : plan.tasks) {
    tasks.push_back({{"id", t.id},
                     {"partitionA", t.partition_a},
                     {"partitionB", t.partition_b},
                     {"selfTask", t.self_task}});
  }
  json j = {{"mode", to_string(plan.mode)},
            {"maxPartitionSize", plan.max_partition_size},
            {"minPartitionSize", plan.min_partition_size},
            {"partitionCount", plan.partitions.size()},
            {"taskCount", plan.tasks.size()},
            {"partitions", std::move(partitions)},
            {"tasks", std::move(tasks)}};
  return j.dump(2) + "\n";
}

void write_plan_tables(std::ostream& out, const PartitionPlan& plan) {
  out << "mode: " << to_string(plan.mode)
      << "  m: " << plan.max_partition_size
      << "  minSize: " << plan.min_partition_size << "\n";
  out << "partitions (" << plan.partitions.size() << "):\n";
  for (const auto& p : plan.partitions) {
    out << "  " << p.id << "  kind=" << to_string(p.kind)
        << "  size=" << p.size();
    if (!p.member_block_keys.empty()) {
      out << "  members=" << p.member_block_keys.size();
    }
    out << "\n";
  }
  out << "tasks (" << plan.tasks.size() << "):\n";
  for (const auto& t : plan.tasks) {
    out << "  " << (t.self_task ? "self " : "cross") << "  "
        << t.partition_a;
    if (!t.self_task) out << " x " << t.partition_b;
    out << "\n";
  }
}

void write_correspondences(std::ostream& out,
                           std::span<const Correspondence> correspondences) {
  for (const auto& c : correspondences) {
    char sim[32];
    std::snprintf(sim, sizeof(sim), "%.6f", c.sim);
    out << csv_escape(c.a.id) << ',' << csv_escape(c.b.id) << ',' << sim
        << '\n';
  }
}

RunArtifacts run_from_config(const RunConfig& config) {
  validate_config(config);
  auto store = std::make_shared<DataStore>();
  load_inputs(config, *store);
  validate_strategy(config.strategy, store->schema_columns());

  RunArtifacts artifacts;
  artifacts.plan = build_plan(config, *store);

  fs::create_directories(config.out_dir);
  artifacts.plan_file = (fs::path(config.out_dir) / "plan.json").string();
  {
    std::ofstream out(artifacts.plan_file, std::ios::binary);
    out << plan_to_json(artifacts.plan);
  }
  if (config.dry_run) {
    artifacts.outcome.ok = true;
    return artifacts;
  }

  artifacts.outcome = run_workflow(artifacts.plan, config.strategy, store,
                                   worker_descriptors(config), config.engine);

  artifacts.result_file = (fs::path(config.out_dir) / "result.csv").string();
  {
    std::ofstream out(artifacts.result_file, std::ios::binary);
    write_correspondences(out, artifacts.outcome.correspondences);
  }
  artifacts.metrics_file = (fs::path(config.out_dir) / "metrics.json").string();
  {
    std::ofstream out(artifacts.metrics_file, std::ios::binary);
    out << metrics_to_json(artifacts.outcome.metrics);
  }
  artifacts.trace_file = (fs::path(config.out_dir) / "trace.log").string();
  {
    std::ofstream out(artifacts.trace_file, std::ios::binary);
    for (const auto& line : artifacts.outcome.trace) out << line << '\n';
  }
  return artifacts;
}

std::vector<SpeedupRow> speedup_experiment(
    const RunConfig& config, const std::vector<std::uint32_t>& thread_counts,
    std::ostream& log) {
  validate_config(config);
  auto store = std::make_shared<DataStore>();
  load_inputs(config, *store);
  validate_strategy(config.strategy, store->schema_columns());
  PartitionPlan plan = build_plan(config, *store);

  std::vector<SpeedupRow> rows;
  std::vector<Correspondence> reference;
  for (std::uint32_t threads : thread_counts) {
    store->clear_results();
    std::vector<WorkerDescriptor> workers = {
        {"w1", threads, config.cache_capacity}};
    RunOutcome outcome =
        run_workflow(plan, config.strategy, store, workers, config.engine);
    if (!outcome.ok) {
      throw IntegrityError("speedup run at " + std::to_string(threads) +
                           " threads failed: " + outcome.error);
    }
    if (rows.empty()) {
      reference = outcome.correspondences;
    } else if (outcome.correspondences != reference) {
      throw IntegrityError("result set diverged across thread counts");
    }
    rows.push_back({threads, outcome.metrics.total_elapsed_seconds, 0.0});
  }
  double baseline = rows.front().elapsed_seconds;
  for (const auto& row : rows) {
    if (row.threads == 1) baseline = row.elapsed_seconds;
  }
  for (auto& row : rows) {
    row.speedup =
        row.elapsed_seconds > 0.0 ? baseline / row.elapsed_seconds : 0.0;
  }
  log << "threads,elapsedSeconds,speedup\n";
  for (const auto& row : rows) {
    char line[96];
    std::snprintf(line, sizeof(line), "%u,%.4f,%.3f\n", row.threads,
                  row.elapsed_seconds, row.speedup);
    log << line;
  }
  return rows;
}

}  // namespace parmatch
