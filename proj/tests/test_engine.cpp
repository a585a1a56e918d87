#include <doctest.h>

#include <chrono>
#include <future>
#include <thread>

#include "parmatch/engine.hpp"
#include "parmatch/error.hpp"
#include "parmatch/strategy.hpp"
#include "support/oracles.hpp"

using namespace parmatch;
using namespace std::chrono_literals;

namespace {

EngineOptions fast_options() {
  EngineOptions options;
  options.heartbeat_interval = 20ms;
  options.heartbeat_timeout = 150ms;
  options.no_worker_timeout = 2000ms;
  return options;
}

// Entities arranged in clusters of three near-identical records so every
// run produces a non-trivial correspondence set.
std::shared_ptr<DataStore> clustered_store(std::size_t n,
                                           bool with_blocking_key = false,
                                           std::size_t misc_every = 7) {
  auto store = std::make_shared<DataStore>();
  for (std::size_t i = 0; i < n; ++i) {
    Entity e;
    e.id = "e" + std::to_string(100000 + i);
    e.source_id = "s";
    std::size_t cluster = i / 3;
    e.attributes["title"] = "product alpha " + std::to_string(cluster);
    e.attributes["description"] =
        "compact storage device revision " + std::to_string(cluster % 10);
    if (with_blocking_key && i % misc_every != 0) {
      e.attributes["type"] = "T" + std::to_string(cluster % 5);
    }
    store->add_entity(std::move(e));
  }
  return store;
}

std::vector<WorkerDescriptor> worker_pool(std::uint32_t workers,
                                          std::uint32_t threads,
                                          std::uint32_t cache) {
  std::vector<WorkerDescriptor> out;
  for (std::uint32_t i = 0; i < workers; ++i) {
    out.push_back({"w" + std::to_string(i + 1), threads, cache});
  }
  return out;
}

}  // namespace

TEST_CASE("select_task maximizes cache affinity with FIFO tie-breaks") {
  std::vector<MatchTask> open = {make_task("P3", "P4", "s", 0),
                                 make_task("P1", "P2", "s", 1),
                                 make_task("P1", "P5", "s", 2)};
  std::set<std::string> cached = {"P1", "P2"};
  auto pick = select_task(open, cached);
  REQUIRE(pick.has_value());
  CHECK(*pick == 1);  // affinity 2 beats affinity 1

  // No cache info degenerates to FIFO.
  CHECK(select_task(open, {}) == 0);

  // Two affinity-1 candidates: the earlier-created one wins.
  std::set<std::string> partial = {"P5", "P3"};
  CHECK(select_task(open, partial) == 0);

  CHECK_FALSE(select_task({}, cached).has_value());
}

TEST_CASE("select_task counts a self task's single partition once") {
  std::vector<MatchTask> open = {make_task("P9", "P9", "s", 0),
                                 make_task("P1", "P2", "s", 1)};
  std::set<std::string> cached = {"P1", "P2"};
  CHECK(select_task(open, cached) == 1);  // cross affinity 2 > self 1
}

TEST_CASE("single worker single thread reproduces the sequential oracle") {
  auto store = clustered_store(60);
  auto plan = size_based_partition(store->entities(), 7, "wam");
  auto outcome = run_workflow(plan, default_wam_strategy(), store,
                              worker_pool(1, 1, 0), fast_options());
  REQUIRE(outcome.ok);
  auto expected = oracle::all_pairs(store->entities(), default_wam_strategy());
  CHECK_FALSE(expected.empty());
  CHECK(outcome.correspondences == expected);
  CHECK(outcome.metrics.task_count == plan.tasks.size());
}

TEST_CASE("multi-worker multi-thread runs produce the identical set") {
  auto store = clustered_store(60);
  auto plan = size_based_partition(store->entities(), 7, "wam");
  auto expected = oracle::all_pairs(store->entities(), default_wam_strategy());
  for (auto [workers, threads] : {std::pair{2u, 2u}, {4u, 4u}, {3u, 1u}}) {
    auto fresh = clustered_store(60);
    auto outcome = run_workflow(plan, default_wam_strategy(), fresh,
                                worker_pool(workers, threads, 4),
                                fast_options());
    REQUIRE(outcome.ok);
    CHECK(outcome.correspondences == expected);
  }
}

TEST_CASE("blocking-based run reproduces the blocking oracle") {
  auto store = clustered_store(90, true);
  auto blocks = block_by_key(store->entities(), "type");
  PartitionPlan plan;
  plan.mode = PlanMode::BlockingBased;
  plan.max_partition_size = 10;
  plan.min_partition_size = 3;
  plan.partitions = tune_partitions(blocks, 10, 3);
  plan.tasks = generate_blocking_tasks(plan.partitions, "wam");

  std::map<EntityKey, std::string> block_of;
  for (const auto& b : blocks) {
    if (b.is_misc()) continue;
    for (const auto& key : b.entities) block_of[key] = *b.key;
  }
  std::map<std::string, std::string> aggregate_of;
  for (const auto& p : plan.partitions) {
    if (p.kind == PartitionKind::Aggregate) {
      for (const auto& key : p.member_block_keys) aggregate_of[key] = p.id;
    }
  }
  auto expected = oracle::blocking_pairs(store->entities(), block_of,
                                         aggregate_of, default_wam_strategy());
  CHECK_FALSE(expected.empty());

  auto outcome = run_workflow(plan, default_wam_strategy(), store,
                              worker_pool(2, 2, 4), fast_options());
  REQUIRE(outcome.ok);
  CHECK(outcome.correspondences == expected);
}

TEST_CASE("empty plan yields an empty result with zero-task metrics") {
  auto store = std::make_shared<DataStore>();
  PartitionPlan plan;
  auto outcome = run_workflow(plan, default_wam_strategy(), store,
                              worker_pool(1, 1, 0), fast_options());
  REQUIRE(outcome.ok);
  CHECK(outcome.correspondences.empty());
  CHECK(outcome.metrics.task_count == 0);
  CHECK(outcome.metrics.pairs_compared == 0);
}

TEST_CASE("with caching disabled every access is a fetch") {
  auto store = clustered_store(40);
  auto plan = size_based_partition(store->entities(), 10, "wam");
  auto outcome = run_workflow(plan, default_wam_strategy(), store,
                              worker_pool(1, 2, 0), fast_options());
  REQUIRE(outcome.ok);
  // 4 partitions: 4 self tasks (1 access) + 6 cross tasks (2 accesses).
  CHECK(outcome.metrics.fetches == 4 + 12);
  CHECK(outcome.metrics.cache_hits == 0);
  CHECK(outcome.metrics.hit_ratio == 0.0);
}

TEST_CASE("accounting identity: hits + fetches equals partition accesses") {
  auto store = clustered_store(60);
  auto plan = size_based_partition(store->entities(), 6, "wam");
  std::uint64_t accesses = 0;
  for (const auto& task : plan.tasks) accesses += task.self_task ? 1 : 2;
  for (std::uint32_t cache : {0u, 2u, 8u}) {
    auto fresh = clustered_store(60);
    auto outcome = run_workflow(plan, default_wam_strategy(), fresh,
                                worker_pool(2, 2, cache), fast_options());
    REQUIRE(outcome.ok);
    CHECK(outcome.metrics.cache_hits + outcome.metrics.fetches == accesses);
    CHECK(outcome.metrics.hit_ratio >= 0.0);
    CHECK(outcome.metrics.hit_ratio <= 1.0);
  }
}

TEST_CASE("pairs compared matches the plan's predicted pair count") {
  auto store = clustered_store(57);
  auto plan = size_based_partition(store->entities(), 9, "wam");
  std::map<std::string, std::uint64_t> sizes;
  for (const auto& p : plan.partitions) sizes[p.id] = p.size();
  std::uint64_t predicted = 0;
  for (const auto& t : plan.tasks) {
    predicted += t.self_task
                     ? sizes[t.partition_a] * (sizes[t.partition_a] - 1) / 2
                     : sizes[t.partition_a] * sizes[t.partition_b];
  }
  CHECK(predicted == 57ull * 56 / 2);  // full Cartesian coverage
  auto outcome = run_workflow(plan, default_wam_strategy(), store,
                              worker_pool(2, 2, 4), fast_options());
  REQUIRE(outcome.ok);
  CHECK(outcome.metrics.pairs_compared == predicted);
}

TEST_CASE("affinity scheduling on a misc-heavy plan beats cold fetching") {
  // 52 key blocks of 8 plus a misc block of 30 split at m=12 into 3 subs.
  auto make_store = [] {
    auto store = std::make_shared<DataStore>();
    std::size_t next = 0;
    for (int b = 0; b < 52; ++b) {
      for (int i = 0; i < 8; ++i) {
        Entity e;
        e.id = "e" + std::to_string(100000 + next++);
        e.source_id = "s";
        e.attributes["title"] = "unit " + std::to_string(b);
        e.attributes["description"] = "desc " + std::to_string(b);
        e.attributes["type"] = "T" + std::to_string(b);
        store->add_entity(std::move(e));
      }
    }
    for (int i = 0; i < 30; ++i) {
      Entity e;
      e.id = "m" + std::to_string(100000 + i);
      e.source_id = "s";
      e.attributes["title"] = "unit misc";
      e.attributes["description"] = "desc misc";
      store->add_entity(std::move(e));
    }
    return store;
  };

  auto store = make_store();
  auto plan = blocking_based_partition(store->entities(), "type", 12, 0, "wam");
  REQUIRE(plan.partitions.size() >= 50);
  int misc_subs = 0;
  for (const auto& p : plan.partitions) {
    if (p.kind == PartitionKind::Misc) ++misc_subs;
  }
  REQUIRE(misc_subs >= 2);

  auto cached = run_workflow(plan, default_wam_strategy(), store,
                             worker_pool(1, 1, 16), fast_options());
  REQUIRE(cached.ok);

  auto cold_store = make_store();
  auto cold = run_workflow(plan, default_wam_strategy(), cold_store,
                           worker_pool(1, 1, 0), fast_options());
  REQUIRE(cold.ok);

  CHECK(cached.correspondences == cold.correspondences);
  CHECK(cached.metrics.fetches < cold.metrics.fetches);
  CHECK(cached.metrics.hit_ratio > 0.5);

  // Same configuration, same seed-free deterministic schedule.
  auto again_store = make_store();
  auto again = run_workflow(plan, default_wam_strategy(), again_store,
                            worker_pool(1, 1, 16), fast_options());
  CHECK(again.metrics.fetches == cached.metrics.fetches);
  CHECK(again.metrics.cache_hits == cached.metrics.cache_hits);
}

TEST_CASE("worker failure mid-run is recovered without result deviation") {
  auto store = clustered_store(80);
  auto plan = size_based_partition(store->entities(), 9, "wam");
  REQUIRE(plan.tasks.size() >= 40);
  auto expected = oracle::all_pairs(store->entities(), default_wam_strategy());

  store->register_plan(plan);
  StrategyTable strategies{{"wam", default_wam_strategy()}};
  Coordinator coordinator(plan, strategies, store, fast_options());
  InProcessWorker w1({"w1", 1, 4}, std::make_shared<LocalDataClient>(store),
                     strategies, coordinator.inbox(), 20ms);
  InProcessWorker w2({"w2", 1, 4}, std::make_shared<LocalDataClient>(store),
                     strategies, coordinator.inbox(), 20ms);
  w1.start();
  w2.start();

  auto future = std::async(std::launch::async, [&] { return coordinator.run(); });
  // Kill one worker after roughly a quarter of the tasks completed.
  std::size_t quarter = plan.tasks.size() / 4;
  while (store->results().size() < quarter) std::this_thread::sleep_for(1ms);
  w2.crash();

  auto outcome = future.get();
  w1.shutdown();
  w2.shutdown();
  REQUIRE(outcome.ok);
  CHECK(outcome.correspondences == expected);

  bool saw_failure = false;
  for (const auto& line : outcome.trace) {
    if (line.rfind("FAIL worker=w2", 0) == 0) saw_failure = true;
  }
  CHECK(saw_failure);
}

TEST_CASE("graceful leave drains in-flight work; idle removal is immediate") {
  auto store = clustered_store(48);
  auto plan = size_based_partition(store->entities(), 8, "wam");
  store->register_plan(plan);
  StrategyTable strategies{{"wam", default_wam_strategy()}};
  Coordinator coordinator(plan, strategies, store, fast_options());
  InProcessWorker w1({"w1", 1, 2}, std::make_shared<LocalDataClient>(store),
                     strategies, coordinator.inbox(), 20ms);
  InProcessWorker w2({"w2", 1, 2}, std::make_shared<LocalDataClient>(store),
                     strategies, coordinator.inbox(), 20ms);
  w1.start();
  w2.start();
  auto future = std::async(std::launch::async, [&] { return coordinator.run(); });
  while (store->results().size() < 3) std::this_thread::sleep_for(1ms);
  w2.leave();
  auto outcome = future.get();
  w1.shutdown();
  w2.shutdown();
  REQUIRE(outcome.ok);
  CHECK(outcome.correspondences ==
        oracle::all_pairs(store->entities(), default_wam_strategy()));
}

TEST_CASE("a worker joining mid-run receives tasks") {
  auto store = clustered_store(60);
  auto plan = size_based_partition(store->entities(), 6, "wam");
  store->register_plan(plan);
  StrategyTable strategies{{"wam", default_wam_strategy()}};
  EngineOptions options = fast_options();
  Coordinator coordinator(plan, strategies, store, options);

  auto future = std::async(std::launch::async, [&] { return coordinator.run(); });
  std::this_thread::sleep_for(50ms);  // no workers yet; run must wait
  InProcessWorker late({"late", 2, 4}, std::make_shared<LocalDataClient>(store),
                       strategies, coordinator.inbox(), 20ms);
  late.start();
  auto outcome = future.get();
  late.shutdown();
  REQUIRE(outcome.ok);
  bool assigned_to_late = false;
  for (const auto& line : outcome.trace) {
    if (line.find("worker=late") != std::string::npos &&
        line.rfind("ASSIGN", 0) == 0) {
      assigned_to_late = true;
    }
  }
  CHECK(assigned_to_late);
}

TEST_CASE("run aborts with a partial-results error when all workers die") {
  auto store = clustered_store(30);
  auto plan = size_based_partition(store->entities(), 5, "wam");
  store->register_plan(plan);
  StrategyTable strategies{{"wam", default_wam_strategy()}};
  EngineOptions options = fast_options();
  options.no_worker_timeout = 200ms;
  Coordinator coordinator(plan, strategies, store, options);
  auto outcome = coordinator.run();  // no worker ever joins
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("no alive workers") != std::string::npos);
}

TEST_CASE("duplicate worker ids are rejected") {
  auto store = clustered_store(30);
  auto plan = size_based_partition(store->entities(), 5, "wam");
  store->register_plan(plan);
  StrategyTable strategies{{"wam", default_wam_strategy()}};
  Coordinator coordinator(plan, strategies, store, fast_options());
  InProcessWorker w1({"dup", 1, 0}, std::make_shared<LocalDataClient>(store),
                     strategies, coordinator.inbox(), 20ms);
  InProcessWorker w2({"dup", 1, 0}, std::make_shared<LocalDataClient>(store),
                     strategies, coordinator.inbox(), 20ms);
  w1.start();
  w2.start();
  auto outcome = coordinator.run();
  w1.shutdown();
  w2.shutdown();
  REQUIRE(outcome.ok);
  bool rejected = false;
  for (const auto& line : outcome.trace) {
    if (line.rfind("REJECT worker=dup", 0) == 0) rejected = true;
  }
  CHECK(rejected);
}

TEST_CASE("unknown strategy id fails the task and aborts after max attempts") {
  auto store = clustered_store(12);
  auto plan = size_based_partition(store->entities(), 6, "missing-strategy");
  store->register_plan(plan);
  StrategyTable strategies{{"wam", default_wam_strategy()}};
  EngineOptions options = fast_options();
  options.max_task_attempts = 2;
  Coordinator coordinator(plan, strategies, store, options);
  InProcessWorker w1({"w1", 1, 0}, std::make_shared<LocalDataClient>(store),
                     strategies, coordinator.inbox(), 20ms);
  w1.start();
  auto outcome = coordinator.run();
  w1.shutdown();
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("failed") != std::string::npos);
}
