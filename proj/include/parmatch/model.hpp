#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace parmatch {

// A record to be matched. Attribute values are stored by name; a missing
// key means the value is absent, which is distinct from an empty string.
struct Entity {
  std::string id;
  std::string source_id;
  std::map<std::string, std::string> attributes;

  // Returns nullptr when the attribute is absent.
  const std::string* attribute(const std::string& name) const {
    auto it = attributes.find(name);
    return it == attributes.end() ? nullptr : &it->second;
  }
};

// Identifies an entity across sources. Ordering is lexicographic byte
// order on (source_id, id), which fixes the canonical pair orientation.
struct EntityKey {
  std::string source_id;
  std::string id;

  auto operator<=>(const EntityKey&) const = default;
};

inline EntityKey key_of(const Entity& e) { return EntityKey{e.source_id, e.id}; }

// An asserted match between two entities with its combined similarity.
// Always stored in canonical orientation: a < b.
struct Correspondence {
  EntityKey a;
  EntityKey b;
  double sim = 0.0;

  auto operator<=>(const Correspondence&) const = default;
};

// Directly mirrors CE = (#nodes, #cores, max_mem) plus the configurable
// thread count per node.
struct ComputingEnvironment {
  std::uint32_t num_nodes = 1;
  std::uint32_t cores_per_node = 1;
  std::uint64_t max_mem_per_node = 0;  // bytes
  std::uint32_t threads_per_node = 0;  // 0 means use cores_per_node

  std::uint32_t effective_threads() const {
    return threads_per_node == 0 ? cores_per_node : threads_per_node;
  }
};

enum class PartitionKind { Plain, BlockWhole, BlockSplit, Aggregate, Misc };

const char* to_string(PartitionKind kind);

// An ordered, immutable set of entities; the unit of caching and of match
// task input. Entities are referenced by key and materialized by the data
// service on registration.
struct Partition {
  std::string id;
  std::vector<EntityKey> entities;
  std::optional<std::string> origin_block_key;
  PartitionKind kind = PartitionKind::Plain;
  std::uint32_t split_index = 0;
  std::uint32_t split_count = 1;  // >= 2 only for split partitions
  std::vector<std::string> member_block_keys;  // Aggregate only

  std::size_t size() const { return entities.size(); }
};

// Unit of parallel work: compare all pairs within one partition (self
// task) or all cross pairs of two partitions. The partition pair is kept
// in canonical order so the task set never holds (A,B) and (B,A).
struct MatchTask {
  std::string id;
  std::string partition_a;
  std::string partition_b;
  bool self_task = false;
  std::string strategy_id;
  std::uint64_t seq = 0;  // creation order, used for FIFO tie-breaking
};

// Builds the canonical task for an unordered partition pair.
MatchTask make_task(std::string partition_a, std::string partition_b,
                    std::string strategy_id, std::uint64_t seq);

struct MatchResult {
  std::string task_id;
  std::vector<Correspondence> correspondences;  // canonical, sorted, unique
  std::uint64_t pairs_compared = 0;
  double elapsed_seconds = 0.0;
};

// Semantic equality, ignoring wall-clock timing. Used to recognize
// byte-identical re-deliveries after failure reassignment.
bool same_result(const MatchResult& lhs, const MatchResult& rhs);

// Orders the pair by (source_id, id). Throws IntegrityError when both refs
// name the same entity.
std::pair<EntityKey, EntityKey> canonical_pair(const EntityKey& e1,
                                               const EntityKey& e2);

// Canonical correspondence for a raw pair; sim is clamped into [0,1].
Correspondence make_correspondence(const EntityKey& e1, const EntityKey& e2,
                                   double sim);

// Set union of per-task correspondences. Duplicates with identical sim
// collapse silently; differing sims for the same pair raise IntegrityError
// since correct task generation never evaluates a pair twice.
std::vector<Correspondence> merge_results(std::span<const MatchResult> results);

}  // namespace parmatch
