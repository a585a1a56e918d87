#include "parmatch/partitioning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "parmatch/error.hpp"

namespace parmatch {
namespace {

std::uint64_t isqrt(std::uint64_t value) {
  if (value == 0) return 0;
  auto root = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(value)));
  while (root > 0 && root * root > value) --root;
  while ((root + 1) * (root + 1) <= value) ++root;
  return root;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view kWhitespace = " \t\r\n\f\v";
  auto begin = s.find_first_not_of(kWhitespace);
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(kWhitespace);
  return s.substr(begin, end - begin + 1);
}

std::string pad_number(std::size_t value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(0, width - digits.size(), '0');
  }
  return digits;
}

std::string split_suffix(std::uint32_t index, std::uint32_t count) {
  return "-" + std::to_string(index) + "of" + std::to_string(count);
}

// Splits a block into k = ceil(size/m) sub-partitions whose sizes differ
// by at most one, preserving entity order.
std::vector<std::vector<EntityKey>> split_entities(
    const std::vector<EntityKey>& entities, std::uint64_t m) {
  std::uint64_t size = entities.size();
  std::uint64_t k = (size + m - 1) / m;
  std::uint64_t base = size / k;
  std::uint64_t remainder = size % k;
  std::vector<std::vector<EntityKey>> parts;
  parts.reserve(k);
  std::size_t offset = 0;
  for (std::uint64_t i = 0; i < k; ++i) {
    std::uint64_t part_size = base + (i < remainder ? 1 : 0);
    parts.emplace_back(entities.begin() + offset,
                       entities.begin() + offset + part_size);
    offset += part_size;
  }
  return parts;
}

// Key set a partition can match on under blocking semantics.
std::vector<std::string> partition_keys(const Partition& p) {
  switch (p.kind) {
    case PartitionKind::Aggregate: return p.member_block_keys;
    case PartitionKind::BlockWhole:
    case PartitionKind::BlockSplit:
      return {p.origin_block_key.value()};
    default: return {};
  }
}

bool keys_intersect(const std::vector<std::string>& a,
                    const std::vector<std::string>& b) {
  for (const auto& ka : a) {
    for (const auto& kb : b) {
      if (ka == kb) return true;
    }
  }
  return false;
}

void check_mode_consistency(std::span<const Partition> partitions,
                            PlanMode mode) {
  for (const auto& p : partitions) {
    bool plain = p.kind == PartitionKind::Plain;
    if ((mode == PlanMode::SizeBased) != plain) {
      throw ConfigError(
          "two-source task generation: partition kinds do not match mode " +
          std::string(to_string(mode)));
    }
  }
}

}  // namespace

const char* to_string(PlanMode mode) {
  return mode == PlanMode::SizeBased ? "sizeBased" : "blockingBased";
}

std::uint64_t max_partition_size(const SizingInput& sizing) {
  if (sizing.max_mem_per_node == 0 || sizing.threads_per_node == 0 ||
      sizing.pair_cost == 0) {
    throw ConfigError("sizing: max_mem, threads and pair cost must be positive");
  }
  std::uint64_t per_task = sizing.max_mem_per_node / sizing.threads_per_node;
  std::uint64_t m = isqrt(per_task / sizing.pair_cost);
  if (m == 0) {
    throw ConfigError(
        "sizing: memory budget per thread does not fit a single entity pair");
  }
  return m;
}

std::string escape_key(std::string_view key) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(key.size());
  for (char raw : key) {
    unsigned char c = static_cast<unsigned char>(raw);
    bool safe = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                (c >= 'A' && c <= 'Z') || c == '_' || c == '.';
    if (safe) {
      out.push_back(raw);
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::string size_partition_id(std::size_t ordinal) {
  return "SIZE-" + pad_number(ordinal, 6);
}

PartitionPlan size_based_partition(std::span<const Entity> entities,
                                   std::uint64_t m,
                                   const std::string& strategy_id,
                                   const std::string& id_prefix) {
  if (m == 0) throw ConfigError("partitioning: max partition size must be >= 1");
  PartitionPlan plan;
  plan.mode = PlanMode::SizeBased;
  plan.max_partition_size = m;
  if (entities.empty()) return plan;

  std::uint64_t n = entities.size();
  std::uint64_t p = (n + m - 1) / m;
  std::uint64_t base = n / p;
  std::uint64_t remainder = n % p;
  std::size_t offset = 0;
  for (std::uint64_t i = 0; i < p; ++i) {
    std::uint64_t part_size = base + (i < remainder ? 1 : 0);
    Partition partition;
    partition.id = id_prefix + size_partition_id(i);
    partition.kind = PartitionKind::Plain;
    partition.entities.reserve(part_size);
    for (std::uint64_t k = 0; k < part_size; ++k) {
      partition.entities.push_back(key_of(entities[offset + k]));
    }
    offset += part_size;
    plan.partitions.push_back(std::move(partition));
  }

  std::uint64_t seq = 0;
  for (std::uint64_t i = 0; i < p; ++i) {
    for (std::uint64_t j = i; j < p; ++j) {
      plan.tasks.push_back(make_task(plan.partitions[i].id,
                                     plan.partitions[j].id, strategy_id,
                                     seq++));
    }
  }
  return plan;
}

std::vector<Block> block_by_key(std::span<const Entity> entities,
                                const std::string& blocking_attribute) {
  std::vector<Block> blocks;
  std::map<std::string, std::size_t> index_by_key;
  Block misc;
  for (const Entity& entity : entities) {
    const std::string* raw = entity.attribute(blocking_attribute);
    std::string_view trimmed = raw ? trim(*raw) : std::string_view{};
    if (trimmed.empty()) {
      misc.entities.push_back(key_of(entity));
      continue;
    }
    std::string key(trimmed);
    auto [it, inserted] = index_by_key.try_emplace(key, blocks.size());
    if (inserted) {
      Block block;
      block.key = key;
      blocks.push_back(std::move(block));
    }
    blocks[it->second].entities.push_back(key_of(entity));
  }
  if (!misc.entities.empty()) blocks.push_back(std::move(misc));
  return blocks;
}

std::vector<Partition> tune_partitions(const std::vector<Block>& blocks,
                                       std::uint64_t m, std::uint64_t min_size,
                                       const std::string& id_prefix) {
  if (m == 0) throw ConfigError("partitioning: max partition size must be >= 1");
  if (min_size > m) {
    throw ConfigError("partitioning: min partition size exceeds max");
  }

  std::vector<const Block*> normal;
  std::vector<const Block*> small;
  const Block* misc = nullptr;
  for (const Block& block : blocks) {
    if (block.entities.empty()) continue;
    if (block.is_misc()) {
      if (misc != nullptr) throw IntegrityError("more than one misc block");
      misc = &block;
    } else if (block.size() < min_size) {
      small.push_back(&block);
    } else {
      normal.push_back(&block);
    }
  }

  std::vector<Partition> partitions;

  // Whole blocks and split families, in key order.
  std::sort(normal.begin(), normal.end(),
            [](const Block* a, const Block* b) { return *a->key < *b->key; });
  for (const Block* block : normal) {
    std::string base_id = id_prefix + "BLK-" + escape_key(*block->key);
    if (block->size() <= m) {
      Partition partition;
      partition.id = base_id;
      partition.kind = PartitionKind::BlockWhole;
      partition.origin_block_key = *block->key;
      partition.entities = block->entities;
      partitions.push_back(std::move(partition));
      continue;
    }
    auto parts = split_entities(block->entities, m);
    auto count = static_cast<std::uint32_t>(parts.size());
    for (std::uint32_t i = 0; i < count; ++i) {
      Partition partition;
      partition.id = base_id + split_suffix(i, count);
      partition.kind = PartitionKind::BlockSplit;
      partition.origin_block_key = *block->key;
      partition.split_index = i;
      partition.split_count = count;
      partition.entities = std::move(parts[i]);
      partitions.push_back(std::move(partition));
    }
  }

  // First-fit-decreasing aggregation of the small blocks.
  std::sort(small.begin(), small.end(), [](const Block* a, const Block* b) {
    if (a->size() != b->size()) return a->size() > b->size();
    return *a->key < *b->key;
  });
  std::vector<Partition> aggregates;
  for (const Block* block : small) {
    Partition* bin = nullptr;
    for (Partition& candidate : aggregates) {
      if (candidate.size() + block->size() <= m) {
        bin = &candidate;
        break;
      }
    }
    if (bin == nullptr) {
      Partition aggregate;
      aggregate.id = id_prefix + "AGG-" + pad_number(aggregates.size(), 4);
      aggregate.kind = PartitionKind::Aggregate;
      aggregates.push_back(std::move(aggregate));
      bin = &aggregates.back();
    }
    bin->member_block_keys.push_back(*block->key);
    bin->entities.insert(bin->entities.end(), block->entities.begin(),
                         block->entities.end());
  }
  for (auto& aggregate : aggregates) partitions.push_back(std::move(aggregate));

  // Misc last; split if oversized, never aggregated.
  if (misc != nullptr) {
    std::string base_id = id_prefix + "MISC";
    if (misc->size() <= m) {
      Partition partition;
      partition.id = base_id;
      partition.kind = PartitionKind::Misc;
      partition.entities = misc->entities;
      partitions.push_back(std::move(partition));
    } else {
      auto parts = split_entities(misc->entities, m);
      auto count = static_cast<std::uint32_t>(parts.size());
      for (std::uint32_t i = 0; i < count; ++i) {
        Partition partition;
        partition.id = base_id + split_suffix(i, count);
        partition.kind = PartitionKind::Misc;
        partition.split_index = i;
        partition.split_count = count;
        partition.entities = std::move(parts[i]);
        partitions.push_back(std::move(partition));
      }
    }
  }
  return partitions;
}

std::vector<MatchTask> generate_blocking_tasks(
    std::span<const Partition> partitions, const std::string& strategy_id) {
  std::vector<MatchTask> tasks;
  std::unordered_set<std::string> seen;
  std::uint64_t seq = 0;
  auto emit = [&](const std::string& a, const std::string& b) {
    MatchTask task = make_task(a, b, strategy_id, seq);
    if (seen.insert(task.id).second) {
      tasks.push_back(std::move(task));
      ++seq;
    }
  };

  std::vector<const Partition*> misc;
  std::vector<const Partition*> non_misc;
  for (const Partition& p : partitions) {
    (p.kind == PartitionKind::Misc ? misc : non_misc).push_back(&p);
  }

  // Whole and aggregate partitions match within themselves.
  for (const Partition* p : non_misc) {
    if (p->kind == PartitionKind::BlockWhole ||
        p->kind == PartitionKind::Aggregate) {
      emit(p->id, p->id);
    }
  }

  // Sub-partitions of one split block match among themselves.
  std::map<std::string, std::vector<const Partition*>> families;
  std::vector<std::string> family_order;
  for (const Partition* p : non_misc) {
    if (p->kind != PartitionKind::BlockSplit) continue;
    auto [it, inserted] =
        families.try_emplace(p->origin_block_key.value());
    if (inserted) family_order.push_back(p->origin_block_key.value());
    it->second.push_back(p);
  }
  for (const auto& key : family_order) {
    auto& members = families[key];
    std::sort(members.begin(), members.end(),
              [](const Partition* a, const Partition* b) {
                return a->split_index < b->split_index;
              });
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i; j < members.size(); ++j) {
        emit(members[i]->id, members[j]->id);
      }
    }
  }

  // Misc partitions match everything. Cross tasks are emitted grouped by
  // the non-misc partition so consecutive tasks share an input, which the
  // affinity scheduler exploits.
  for (const Partition* p : non_misc) {
    for (const Partition* M : misc) emit(M->id, p->id);
  }
  for (std::size_t i = 0; i < misc.size(); ++i) {
    for (std::size_t j = i; j < misc.size(); ++j) {
      emit(misc[i]->id, misc[j]->id);
    }
  }
  return tasks;
}

PartitionPlan blocking_based_partition(std::span<const Entity> entities,
                                       const std::string& blocking_attribute,
                                       std::uint64_t m, std::uint64_t min_size,
                                       const std::string& strategy_id,
                                       const std::string& id_prefix) {
  PartitionPlan plan;
  plan.mode = PlanMode::BlockingBased;
  plan.max_partition_size = m;
  plan.min_partition_size = min_size;
  if (entities.empty()) return plan;
  auto blocks = block_by_key(entities, blocking_attribute);
  plan.partitions = tune_partitions(blocks, m, min_size, id_prefix);
  plan.tasks = generate_blocking_tasks(plan.partitions, strategy_id);
  return plan;
}

std::vector<MatchTask> generate_two_source_tasks(
    std::span<const Partition> partitions_a,
    std::span<const Partition> partitions_b, bool duplicate_free,
    PlanMode mode, const std::string& strategy_id) {
  check_mode_consistency(partitions_a, mode);
  check_mode_consistency(partitions_b, mode);
  {
    std::unordered_set<std::string> ids;
    for (const auto& p : partitions_a) ids.insert(p.id);
    for (const auto& p : partitions_b) {
      if (ids.contains(p.id)) {
        throw IntegrityError("partition id collides across sources: " + p.id);
      }
    }
  }

  if (!duplicate_free) {
    // Union semantics: single-source generation over the combined list.
    std::vector<Partition> combined(partitions_a.begin(), partitions_a.end());
    combined.insert(combined.end(), partitions_b.begin(), partitions_b.end());
    if (mode == PlanMode::BlockingBased) {
      return generate_blocking_tasks(combined, strategy_id);
    }
    std::vector<MatchTask> tasks;
    std::uint64_t seq = 0;
    for (std::size_t i = 0; i < combined.size(); ++i) {
      for (std::size_t j = i; j < combined.size(); ++j) {
        tasks.push_back(make_task(combined[i].id, combined[j].id, strategy_id,
                                  seq++));
      }
    }
    return tasks;
  }

  std::vector<MatchTask> tasks;
  std::uint64_t seq = 0;
  if (mode == PlanMode::SizeBased) {
    for (const auto& pa : partitions_a) {
      for (const auto& pb : partitions_b) {
        tasks.push_back(make_task(pa.id, pb.id, strategy_id, seq++));
      }
    }
    return tasks;
  }

  // Blocking-based, duplicate-free: pair on intersecting key sets; misc
  // matches everything on the other side.
  for (const auto& pa : partitions_a) {
    auto keys_a = partition_keys(pa);
    for (const auto& pb : partitions_b) {
      bool misc_pair = pa.kind == PartitionKind::Misc ||
                       pb.kind == PartitionKind::Misc;
      if (misc_pair || keys_intersect(keys_a, partition_keys(pb))) {
        tasks.push_back(make_task(pa.id, pb.id, strategy_id, seq++));
      }
    }
  }
  return tasks;
}

}  // namespace parmatch
