#include "parmatch/model.hpp"

#include <algorithm>

#include "parmatch/error.hpp"

namespace parmatch {

const char* to_string(PartitionKind kind) {
  switch (kind) {
    case PartitionKind::Plain: return "plain";
    case PartitionKind::BlockWhole: return "blockWhole";
    case PartitionKind::BlockSplit: return "blockSplit";
    case PartitionKind::Aggregate: return "aggregate";
    case PartitionKind::Misc: return "misc";
  }
  return "?";
}

MatchTask make_task(std::string partition_a, std::string partition_b,
                    std::string strategy_id, std::uint64_t seq) {
  if (partition_b < partition_a) std::swap(partition_a, partition_b);
  MatchTask task;
  task.self_task = partition_a == partition_b;
  task.id = partition_a + "|" + partition_b;
  task.partition_a = std::move(partition_a);
  task.partition_b = std::move(partition_b);
  task.strategy_id = std::move(strategy_id);
  task.seq = seq;
  return task;
}

bool same_result(const MatchResult& lhs, const MatchResult& rhs) {
  return lhs.task_id == rhs.task_id &&
         lhs.pairs_compared == rhs.pairs_compared &&
         lhs.correspondences == rhs.correspondences;
}

std::pair<EntityKey, EntityKey> canonical_pair(const EntityKey& e1,
                                               const EntityKey& e2) {
  if (e1 == e2) {
    throw IntegrityError("self-pair rejected: " + e1.source_id + ":" + e1.id);
  }
  if (e2 < e1) return {e2, e1};
  return {e1, e2};
}

Correspondence make_correspondence(const EntityKey& e1, const EntityKey& e2,
                                   double sim) {
  auto [a, b] = canonical_pair(e1, e2);
  return Correspondence{std::move(a), std::move(b),
                        std::clamp(sim, 0.0, 1.0)};
}

std::vector<Correspondence> merge_results(std::span<const MatchResult> results) {
  std::vector<Correspondence> merged;
  for (const auto& result : results) {
    merged.insert(merged.end(), result.correspondences.begin(),
                  result.correspondences.end());
  }
  std::sort(merged.begin(), merged.end());
  std::vector<Correspondence> out;
  out.reserve(merged.size());
  for (auto& c : merged) {
    if (!out.empty() && out.back().a == c.a && out.back().b == c.b) {
      if (out.back().sim != c.sim) {
        throw IntegrityError("conflicting similarities for pair " +
                             c.a.source_id + ":" + c.a.id + " / " +
                             c.b.source_id + ":" + c.b.id);
      }
      continue;  // identical duplicate collapses
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace parmatch
