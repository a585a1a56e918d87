#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "parmatch/error.hpp"
#include "parmatch/partitioning.hpp"
#include "support/oracles.hpp"

using namespace parmatch;

namespace {

std::vector<Entity> make_entities(std::size_t n, const std::string& source = "s") {
  std::vector<Entity> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Entity e;
    e.id = "e" + std::to_string(100000 + i);
    e.source_id = source;
    out.push_back(std::move(e));
  }
  return out;
}

// Entities laid out so block_by_key produces the requested block sizes;
// missing < 0 is not allowed, missing entities get no type attribute.
std::vector<Entity> make_blocked_entities(const std::vector<std::size_t>& sizes,
                                          std::size_t misc_count,
                                          const std::string& source = "s") {
  std::vector<Entity> out;
  std::size_t next = 0;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    for (std::size_t i = 0; i < sizes[b]; ++i) {
      Entity e;
      e.id = "e" + std::to_string(100000 + next++);
      e.source_id = source;
      e.attributes["type"] = "B" + std::to_string(b);
      out.push_back(std::move(e));
    }
  }
  for (std::size_t i = 0; i < misc_count; ++i) {
    Entity e;
    e.id = "e" + std::to_string(100000 + next++);
    e.source_id = source;
    out.push_back(std::move(e));
  }
  return out;
}

// Set of unordered entity pairs induced by a task set.
std::set<std::pair<EntityKey, EntityKey>> induced_pairs(
    const PartitionPlan& plan, bool expect_unique = true) {
  std::map<std::string, const Partition*> by_id;
  for (const auto& p : plan.partitions) by_id[p.id] = &p;
  std::set<std::pair<EntityKey, EntityKey>> pairs;
  for (const auto& task : plan.tasks) {
    const Partition* a = by_id.at(task.partition_a);
    const Partition* b = by_id.at(task.partition_b);
    if (task.self_task) {
      for (std::size_t i = 0; i < a->entities.size(); ++i) {
        for (std::size_t j = i + 1; j < a->entities.size(); ++j) {
          auto pair = canonical_pair(a->entities[i], a->entities[j]);
          bool inserted = pairs.insert(pair).second;
          if (expect_unique) REQUIRE(inserted);
        }
      }
    } else {
      for (const auto& ea : a->entities) {
        for (const auto& eb : b->entities) {
          auto pair = canonical_pair(ea, eb);
          bool inserted = pairs.insert(pair).second;
          if (expect_unique) REQUIRE(inserted);
        }
      }
    }
  }
  return pairs;
}

}  // namespace

TEST_CASE("memory-restricted partition size from the paper's examples") {
  // 2 GB decimal over 4 threads = 500 MB per task; 20 B per pair -> 5000.
  CHECK(max_partition_size({2'000'000'000, 4, 20}) == 5000);
  // 1 kB per pair -> floor(sqrt(500000)) = 707.
  CHECK(max_partition_size({2'000'000'000, 4, 1000}) == 707);
}

TEST_CASE("sizing boundary and error cases") {
  // Pair cost equals the whole per-thread budget: one entity still fits.
  CHECK(max_partition_size({400, 4, 100}) == 1);
  CHECK_THROWS_AS(max_partition_size({400, 4, 1000}), ConfigError);
  CHECK_THROWS_AS(max_partition_size({0, 4, 20}), ConfigError);
}

TEST_CASE("size-based partitioning: 3600 entities at m=700") {
  auto entities = make_entities(3600);
  auto plan = size_based_partition(entities, 700, "wam");
  CHECK(plan.partitions.size() == 6);
  CHECK(plan.tasks.size() == 21);  // 6 + 6*5/2
  for (const auto& p : plan.partitions) CHECK(p.size() == 600);
}

TEST_CASE("size-based partitioning: single partition edge") {
  auto entities = make_entities(5);
  auto plan = size_based_partition(entities, 10, "wam");
  CHECK(plan.partitions.size() == 1);
  REQUIRE(plan.tasks.size() == 1);
  CHECK(plan.tasks[0].self_task);
}

TEST_CASE("size-based partitioning: n=4000, m=1000") {
  auto entities = make_entities(4000);
  auto plan = size_based_partition(entities, 1000, "wam");
  CHECK(plan.partitions.size() == 4);
  CHECK(plan.tasks.size() == 10);
}

TEST_CASE("size-based partition sizes differ by at most one, input order kept") {
  auto entities = make_entities(10);
  auto plan = size_based_partition(entities, 4, "wam");
  REQUIRE(plan.partitions.size() == 3);
  CHECK(plan.partitions[0].size() == 4);
  CHECK(plan.partitions[1].size() == 3);
  CHECK(plan.partitions[2].size() == 3);
  CHECK(plan.partitions[0].entities[0].id == "e100000");
  CHECK(plan.partitions[2].entities[2].id == "e100009");
}

TEST_CASE("size-based coverage equals the full Cartesian pair set") {
  for (std::size_t n : {1u, 7u, 50u, 143u}) {
    for (std::uint64_t m : {1u, 3u, 10u, 200u}) {
      auto entities = make_entities(n);
      auto plan = size_based_partition(entities, m, "wam");
      auto pairs = induced_pairs(plan);
      CHECK(pairs.size() == n * (n - 1) / 2);
    }
  }
}

TEST_CASE("blocking groups by key and collects misc") {
  std::vector<Entity> entities;
  for (auto type : {"A", "A", "B"}) {
    Entity e;
    e.id = "e" + std::to_string(entities.size());
    e.source_id = "s";
    e.attributes["type"] = type;
    entities.push_back(std::move(e));
  }
  auto blocks = block_by_key(entities, "type");
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].key == "A");
  CHECK(blocks[0].size() == 2);
  CHECK(blocks[1].key == "B");

  // Empty and whitespace-only values land in misc, e.g. 600 of 3600.
  auto mixed = make_blocked_entities({3000}, 600);
  auto blocks2 = block_by_key(mixed, "type");
  REQUIRE(blocks2.size() == 2);
  CHECK(blocks2[1].is_misc());
  CHECK(blocks2[1].size() == 600);

  // All entities missing the attribute degenerate to one misc block.
  auto all_misc = block_by_key(make_entities(10), "type");
  REQUIRE(all_misc.size() == 1);
  CHECK(all_misc[0].is_misc());
  CHECK(all_misc[0].size() == 10);
}

TEST_CASE("blocking keys are trimmed before comparison") {
  std::vector<Entity> entities = make_entities(3);
  entities[0].attributes["type"] = " disk ";
  entities[1].attributes["type"] = "disk";
  entities[2].attributes["type"] = "  ";
  auto blocks = block_by_key(entities, "type");
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].key == "disk");
  CHECK(blocks[0].size() == 2);
  CHECK(blocks[1].is_misc());
}

TEST_CASE("partition tuning reproduces the drives-and-storage example") {
  // Blocks {1300, 650, 450, 200, 200, 200} plus misc 600, m=700, min=210:
  // the 1300 block splits in two, the three 200 blocks aggregate to 600.
  auto entities = make_blocked_entities({1300, 650, 450, 200, 200, 200}, 600);
  auto blocks = block_by_key(entities, "type");
  auto partitions = tune_partitions(blocks, 700, 210);
  REQUIRE(partitions.size() == 6);

  std::map<PartitionKind, int> kinds;
  std::uint64_t total = 0;
  for (const auto& p : partitions) {
    ++kinds[p.kind];
    total += p.size();
    CHECK(p.size() <= 700);
  }
  CHECK(total == 3600);
  CHECK(kinds[PartitionKind::BlockSplit] == 2);
  CHECK(kinds[PartitionKind::BlockWhole] == 2);
  CHECK(kinds[PartitionKind::Aggregate] == 1);
  CHECK(kinds[PartitionKind::Misc] == 1);

  for (const auto& p : partitions) {
    if (p.kind == PartitionKind::BlockSplit) CHECK(p.size() == 650);
    if (p.kind == PartitionKind::Aggregate) {
      CHECK(p.size() == 600);
      CHECK(p.member_block_keys.size() == 3);
    }
    if (p.kind == PartitionKind::Misc) CHECK(p.size() == 600);
  }

  auto tasks = generate_blocking_tasks(partitions, "wam");
  CHECK(tasks.size() == 12);  // 1+1+1 selfs, 3 split family, 6 misc
}

TEST_CASE("tuning is a no-op when all blocks are in range") {
  auto entities = make_blocked_entities({300, 400, 500}, 0);
  auto blocks = block_by_key(entities, "type");
  auto partitions = tune_partitions(blocks, 700, 210);
  REQUIRE(partitions.size() == 3);
  for (const auto& p : partitions) CHECK(p.kind == PartitionKind::BlockWhole);
  auto tasks = generate_blocking_tasks(partitions, "wam");
  CHECK(tasks.size() == 3);
}

TEST_CASE("a block of size 3m+1 splits into four near-equal parts") {
  auto entities = make_blocked_entities({301}, 0);
  auto blocks = block_by_key(entities, "type");
  auto partitions = tune_partitions(blocks, 100, 0);
  REQUIRE(partitions.size() == 4);
  std::uint64_t total = 0;
  for (const auto& p : partitions) {
    CHECK(p.kind == PartitionKind::BlockSplit);
    CHECK(p.size() >= 75);
    CHECK(p.size() <= 76);
    total += p.size();
  }
  CHECK(total == 301);
}

TEST_CASE("misc splits but never aggregates; entity order is preserved") {
  auto entities = make_blocked_entities({50}, 130);
  auto blocks = block_by_key(entities, "type");
  auto partitions = tune_partitions(blocks, 100, 10);
  REQUIRE(partitions.size() == 3);
  CHECK(partitions[0].kind == PartitionKind::BlockWhole);
  CHECK(partitions[1].kind == PartitionKind::Misc);
  CHECK(partitions[2].kind == PartitionKind::Misc);
  CHECK(partitions[1].size() == 65);
  CHECK(partitions[2].size() == 65);
  CHECK(partitions[1].entities.front().id < partitions[2].entities.front().id);
}

TEST_CASE("tuning rejects min size above max size") {
  auto blocks = block_by_key(make_blocked_entities({10}, 0), "type");
  CHECK_THROWS_AS(tune_partitions(blocks, 100, 101), ConfigError);
}

TEST_CASE("misc with split sub-partitions is matched against everything") {
  // 2 normal blocks + misc split into 2: 2 selfs + misc tasks
  // {2 selfs, 1 misc-misc cross, 4 misc-normal cross} = 9 total.
  auto entities = make_blocked_entities({40, 40}, 90);
  auto blocks = block_by_key(entities, "type");
  auto partitions = tune_partitions(blocks, 50, 0);
  REQUIRE(partitions.size() == 4);
  auto tasks = generate_blocking_tasks(partitions, "wam");
  CHECK(tasks.size() == 9);

  PartitionPlan plan;
  plan.mode = PlanMode::BlockingBased;
  plan.partitions = partitions;
  plan.tasks = tasks;
  auto pairs = induced_pairs(plan);
  // Expected: intra-block pairs + every pair touching a misc entity.
  std::size_t expected = 2 * (40 * 39 / 2)    // two normal blocks
                         + 90 * 89 / 2        // misc-misc
                         + 90 * 80;           // misc vs normal
  CHECK(pairs.size() == expected);
}

TEST_CASE("blocking coverage is exact for split and aggregated blocks") {
  auto entities = make_blocked_entities({23, 9, 8, 3, 120}, 17);
  auto blocks = block_by_key(entities, "type");
  PartitionPlan plan;
  plan.mode = PlanMode::BlockingBased;
  plan.partitions = tune_partitions(blocks, 40, 10);
  plan.tasks = generate_blocking_tasks(plan.partitions, "wam");

  // Aggregate membership drives the expected pair set.
  std::map<std::string, std::string> aggregate_of;
  for (const auto& p : plan.partitions) {
    if (p.kind == PartitionKind::Aggregate) {
      for (const auto& key : p.member_block_keys) aggregate_of[key] = p.id;
    }
  }
  std::map<EntityKey, std::string> block_of;
  for (const auto& b : blocks) {
    if (b.is_misc()) continue;
    for (const auto& e : b.entities) block_of[e] = *b.key;
  }
  auto group_of = [&](const EntityKey& key) -> std::string {
    auto it = block_of.find(key);
    if (it == block_of.end()) return "";  // misc
    auto agg = aggregate_of.find(it->second);
    return agg == aggregate_of.end() ? "blk:" + it->second
                                     : "agg:" + agg->second;
  };

  std::set<std::pair<EntityKey, EntityKey>> expected;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    for (std::size_t j = i + 1; j < entities.size(); ++j) {
      auto ka = key_of(entities[i]);
      auto kb = key_of(entities[j]);
      auto ga = group_of(ka);
      auto gb = group_of(kb);
      if (ga.empty() || gb.empty() || ga == gb) {
        expected.insert(canonical_pair(ka, kb));
      }
    }
  }
  CHECK(induced_pairs(plan) == expected);
}

TEST_CASE("aggregation only ever adds pairs relative to pure blocking") {
  auto entities = make_blocked_entities({12, 5, 4, 3, 2}, 6);
  auto blocks = block_by_key(entities, "type");
  PartitionPlan tuned;
  tuned.partitions = tune_partitions(blocks, 15, 6);
  tuned.tasks = generate_blocking_tasks(tuned.partitions, "wam");

  PartitionPlan pure;
  pure.partitions = tune_partitions(blocks, 15, 0);  // no aggregation
  pure.tasks = generate_blocking_tasks(pure.partitions, "wam");

  auto tuned_pairs = induced_pairs(tuned);
  for (const auto& pair : induced_pairs(pure)) {
    CHECK(tuned_pairs.contains(pair));
  }
}

TEST_CASE("task-count formulas hold over random trials") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    std::uint64_t p = 1 + oracle::below(rng, 50);
    std::uint64_t m = 1 + oracle::below(rng, 20);
    auto entities = make_entities(p * m - oracle::below(rng, m));
    auto plan = size_based_partition(entities, m, "wam");
    std::uint64_t parts = plan.partitions.size();
    REQUIRE(plan.tasks.size() == parts * (parts + 1) / 2);

    // A single oversized block splits into k = ceil(s/m) parts with the
    // triangular intra-task count.
    std::uint64_t s = m + 1 + oracle::below(rng, 5 * m);
    auto big = make_blocked_entities({s}, 0);
    auto partitions = tune_partitions(block_by_key(big, "type"), m, 0);
    std::uint64_t k = (s + m - 1) / m;
    REQUIRE(partitions.size() == k);
    auto tasks = generate_blocking_tasks(partitions, "wam");
    REQUIRE(tasks.size() == k * (k + 1) / 2);
  }
}

TEST_CASE("two duplicate-free size-based sources emit the bipartite grid") {
  auto a = size_based_partition(make_entities(30, "A"), 10, "wam", "A/");
  auto b = size_based_partition(make_entities(40, "B"), 10, "wam", "B/");
  auto tasks = generate_two_source_tasks(a.partitions, b.partitions, true,
                                         PlanMode::SizeBased, "wam");
  CHECK(tasks.size() == 12);  // 3 * 4
  for (const auto& t : tasks) CHECK_FALSE(t.self_task);

  // Full bipartite coverage, each cross pair exactly once.
  PartitionPlan plan;
  plan.partitions = a.partitions;
  plan.partitions.insert(plan.partitions.end(), b.partitions.begin(),
                         b.partitions.end());
  plan.tasks = tasks;
  auto pairs = induced_pairs(plan);
  CHECK(pairs.size() == 30 * 40);
}

TEST_CASE("two sources without the duplicate-free guarantee use the union") {
  auto a = size_based_partition(make_entities(30, "A"), 10, "wam", "A/");
  auto b = size_based_partition(make_entities(20, "B"), 10, "wam", "B/");
  auto tasks = generate_two_source_tasks(a.partitions, b.partitions, false,
                                         PlanMode::SizeBased, "wam");
  std::uint64_t pq = 5;
  CHECK(tasks.size() == pq + pq * (pq - 1) / 2);
}

TEST_CASE("two-source blocking pairs intersecting keys only") {
  // Keys {A, B} vs {B, C} with no misc: exactly the B x B task remains.
  std::vector<Entity> ea = make_entities(8, "srcA");
  for (std::size_t i = 0; i < ea.size(); ++i) {
    ea[i].attributes["type"] = i < 4 ? "A" : "B";
  }
  std::vector<Entity> eb = make_entities(6, "srcB");
  for (std::size_t i = 0; i < eb.size(); ++i) {
    eb[i].attributes["type"] = i < 3 ? "B" : "C";
  }
  auto pa = tune_partitions(block_by_key(ea, "type"), 100, 0, "A/");
  auto pb = tune_partitions(block_by_key(eb, "type"), 100, 0, "B/");
  auto tasks = generate_two_source_tasks(pa, pb, true,
                                         PlanMode::BlockingBased, "wam");
  REQUIRE(tasks.size() == 1);
  CHECK(tasks[0].partition_a == "A/BLK-B");
  CHECK(tasks[0].partition_b == "B/BLK-B");
}

TEST_CASE("two-source blocking with disjoint keys yields only misc tasks") {
  std::vector<Entity> ea = make_entities(6, "A");
  for (auto& e : ea) e.attributes["type"] = "X";
  std::vector<Entity> eb = make_entities(8, "B");
  for (std::size_t i = 0; i < eb.size(); ++i) {
    if (i < 5) eb[i].attributes["type"] = "Y";
  }
  auto pa = tune_partitions(block_by_key(ea, "type"), 100, 0, "A/");
  auto pb = tune_partitions(block_by_key(eb, "type"), 100, 0, "B/");
  auto tasks = generate_two_source_tasks(pa, pb, true,
                                         PlanMode::BlockingBased, "wam");
  // X vs {Y, miscB}: key X matches nothing, so only miscB x X remains.
  REQUIRE(tasks.size() == 1);
  CHECK(tasks[0].partition_a == "A/BLK-X");
  CHECK(tasks[0].partition_b == "B/MISC");
}

TEST_CASE("two-source generation validates modes and id collisions") {
  auto a = size_based_partition(make_entities(10, "A"), 5, "wam", "A/");
  auto blocked =
      blocking_based_partition(make_blocked_entities({10}, 0, "B"), "type",
                               100, 0, "wam", "B/");
  CHECK_THROWS_AS(
      generate_two_source_tasks(a.partitions, blocked.partitions, true,
                                PlanMode::SizeBased, "wam"),
      ConfigError);

  auto same_prefix = size_based_partition(make_entities(10, "B"), 5, "wam");
  auto same_prefix2 = size_based_partition(make_entities(10, "C"), 5, "wam");
  CHECK_THROWS_AS(
      generate_two_source_tasks(same_prefix.partitions,
                                same_prefix2.partitions, true,
                                PlanMode::SizeBased, "wam"),
      IntegrityError);
}

TEST_CASE("partition ids are deterministic and collision-free") {
  CHECK(escape_key("3.5in") == "3.5in");
  CHECK(escape_key("a b|c") == "a%20b%7Cc");
  CHECK(size_partition_id(3) == "SIZE-000003");

  auto entities = make_blocked_entities({120, 10}, 30);
  auto plan1 = blocking_based_partition(entities, "type", 50, 5, "wam");
  auto plan2 = blocking_based_partition(entities, "type", 50, 5, "wam");
  REQUIRE(plan1.partitions.size() == plan2.partitions.size());
  std::set<std::string> ids;
  for (std::size_t i = 0; i < plan1.partitions.size(); ++i) {
    CHECK(plan1.partitions[i].id == plan2.partitions[i].id);
    CHECK(ids.insert(plan1.partitions[i].id).second);
  }
}
