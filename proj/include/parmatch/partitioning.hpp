#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parmatch/model.hpp"

namespace parmatch {

enum class PlanMode { SizeBased, BlockingBased };

const char* to_string(PlanMode mode);

// Memory inputs that bound the partition size.
struct SizingInput {
  std::uint64_t max_mem_per_node = 0;  // bytes
  std::uint32_t threads_per_node = 0;
  std::uint64_t pair_cost = 0;  // c_ms, bytes per entity pair
};

// m = floor(sqrt((max_mem / threads) / c_ms)). Throws ConfigError when the
// budget does not fit a single pair.
std::uint64_t max_partition_size(const SizingInput& sizing);

// One blocking output cluster. A missing key marks the misc block holding
// entities whose blocking attribute is absent or empty.
struct Block {
  std::optional<std::string> key;
  std::vector<EntityKey> entities;

  bool is_misc() const { return !key.has_value(); }
  std::size_t size() const { return entities.size(); }
};

// The complete partitioning output: partitions plus the match tasks that
// cover them.
struct PartitionPlan {
  PlanMode mode = PlanMode::SizeBased;
  std::uint64_t max_partition_size = 0;  // m
  std::uint64_t min_partition_size = 0;
  std::vector<Partition> partitions;
  std::vector<MatchTask> tasks;
};

// Splits entities into p = ceil(n/m) partitions of near-equal size in
// input order and generates the p + p(p-1)/2 triangular task set.
PartitionPlan size_based_partition(std::span<const Entity> entities,
                                   std::uint64_t m,
                                   const std::string& strategy_id,
                                   const std::string& id_prefix = "");

// One block per distinct non-empty attribute value (keys are compared
// after trimming whitespace); entities with an absent or empty value land
// in the misc block, which is always last when present.
std::vector<Block> block_by_key(std::span<const Entity> entities,
                                const std::string& blocking_attribute);

// Partition tuning: blocks larger than m split into near-equal
// sub-partitions, non-misc blocks smaller than min_size are packed into
// aggregate partitions (first-fit-decreasing with capacity m), everything
// else passes through whole. Misc splits if needed but never aggregates.
std::vector<Partition> tune_partitions(const std::vector<Block>& blocks,
                                       std::uint64_t m, std::uint64_t min_size,
                                       const std::string& id_prefix = "");

// Task generation over tuned partitions: one self task per whole/aggregate
// partition, the full triangle within each split family, and every misc
// (sub-)partition matched against all partitions including itself.
std::vector<MatchTask> generate_blocking_tasks(
    std::span<const Partition> partitions, const std::string& strategy_id);

// Blocking, tuning and task generation in one step.
PartitionPlan blocking_based_partition(std::span<const Entity> entities,
                                       const std::string& blocking_attribute,
                                       std::uint64_t m, std::uint64_t min_size,
                                       const std::string& strategy_id,
                                       const std::string& id_prefix = "");

// Task generation across two sources. With duplicate_free=true, size-based
// plans emit only the |A|x|B| cross tasks and blocking plans pair
// partitions whose block keys intersect, with misc partitions matched
// against all partitions of the other source. With duplicate_free=false
// the partition lists are concatenated and single-source generation
// applies.
std::vector<MatchTask> generate_two_source_tasks(
    std::span<const Partition> partitions_a,
    std::span<const Partition> partitions_b, bool duplicate_free,
    PlanMode mode, const std::string& strategy_id);

// Deterministic partition id helpers.
std::string escape_key(std::string_view key);
std::string size_partition_id(std::size_t ordinal);

}  // namespace parmatch
