#include "parmatch/engine.hpp"

#include <algorithm>

#include "parmatch/error.hpp"
#include "parmatch/strategy.hpp"

namespace parmatch {

using Clock = std::chrono::steady_clock;

std::optional<std::size_t> select_task(std::span<const MatchTask> open_tasks,
                                       const std::set<std::string>& cached) {
  std::optional<std::size_t> best;
  int best_affinity = -1;
  for (std::size_t i = 0; i < open_tasks.size(); ++i) {
    const MatchTask& task = open_tasks[i];
    int affinity = cached.contains(task.partition_a) ? 1 : 0;
    if (!task.self_task && cached.contains(task.partition_b)) ++affinity;
    // Ties break FIFO; the list is ordered by creation seq, so the first
    // task seen at a given affinity wins.
    if (affinity > best_affinity) {
      best_affinity = affinity;
      best = i;
      if (affinity == 2) break;
    }
  }
  return best;
}

Coordinator::Coordinator(PartitionPlan plan, StrategyTable strategies,
                         std::shared_ptr<DataStore> store,
                         EngineOptions options)
    : plan_(std::move(plan)),
      strategies_(std::move(strategies)),
      store_(std::move(store)),
      options_(options) {
  std::vector<MatchTask> ordered = plan_.tasks;
  std::sort(ordered.begin(), ordered.end(),
            [](const MatchTask& a, const MatchTask& b) { return a.seq < b.seq; });
  open_.assign(ordered.begin(), ordered.end());
}

void Coordinator::trace(std::string line) { trace_.push_back(std::move(line)); }

void Coordinator::abort_run(const std::string& error) {
  if (aborted_) return;
  aborted_ = true;
  abort_error_ = error;
}

void Coordinator::requeue(MatchTask task) {
  trace("REQUEUE task=" + task.id);
  auto it = std::find_if(open_.begin(), open_.end(), [&](const MatchTask& t) {
    return t.seq > task.seq;
  });
  open_.insert(it, std::move(task));
}

void Coordinator::assign_tasks(const std::string& worker_id) {
  auto member_it = members_.find(worker_id);
  if (member_it == members_.end()) return;
  Member& member = member_it->second;
  while (!member.draining &&
         member.in_flight.size() < member.descriptor.thread_count &&
         !open_.empty()) {
    std::vector<MatchTask> snapshot(open_.begin(), open_.end());
    auto index = select_task(snapshot, member.cache_status);
    if (!index) break;
    auto it = std::next(open_.begin(), static_cast<std::ptrdiff_t>(*index));
    MatchTask task = *it;
    open_.erase(it);
    member.in_flight.insert(task.id);
    in_flight_[task.id] = InFlight{task, worker_id};
    trace("ASSIGN task=" + task.id + " worker=" + worker_id);
    member.endpoint->send(AssignTaskMessage{task.id, task.partition_a,
                                            task.partition_b, task.self_task,
                                            task.strategy_id});
  }
}

void Coordinator::assign_everywhere() {
  for (auto& [worker_id, member] : members_) assign_tasks(worker_id);
}

void Coordinator::handle(WorkerJoinEvent& event) {
  const std::string& worker_id = event.descriptor.worker_id;
  if (members_.contains(worker_id)) {
    trace("REJECT worker=" + worker_id + " reason=duplicate-id");
    event.endpoint->send(StopMessage{});
    return;
  }
  Member member;
  member.descriptor = event.descriptor;
  member.endpoint = std::move(event.endpoint);
  member.last_seen = Clock::now();
  members_.emplace(worker_id, std::move(member));
  trace("JOIN worker=" + worker_id + " threads=" +
        std::to_string(event.descriptor.thread_count) + " cache=" +
        std::to_string(event.descriptor.cache_capacity));

  SetupMessage setup;
  for (const auto& [id, strategy] : strategies_) setup.strategies.push_back(strategy);
  setup.heartbeat_interval_ms =
      static_cast<std::uint32_t>(options_.heartbeat_interval.count());
  members_.at(worker_id).endpoint->send(setup);
  assign_tasks(worker_id);
}

void Coordinator::handle(const LeaveMessage& msg) {
  auto it = members_.find(msg.worker_id);
  if (it == members_.end()) return;
  it->second.draining = true;
  trace("DRAIN worker=" + msg.worker_id);
  drop_if_drained(msg.worker_id);
}

void Coordinator::drop_if_drained(const std::string& worker_id) {
  auto it = members_.find(worker_id);
  if (it == members_.end() || !it->second.draining) return;
  if (!it->second.in_flight.empty()) return;
  it->second.endpoint->send(StopMessage{});
  members_.erase(it);
  trace("LEAVE worker=" + worker_id);
}

void Coordinator::handle(const HeartbeatMessage& msg) {
  auto it = members_.find(msg.worker_id);
  if (it != members_.end()) it->second.last_seen = Clock::now();
}

void Coordinator::handle(const CompletionMessage& msg) {
  try {
    store_->store_result(msg.result);
  } catch (const IntegrityError& e) {
    abort_run(e.what());
    return;
  } catch (const NotFoundError& e) {
    abort_run(e.what());
    return;
  }

  auto member_it = members_.find(msg.worker_id);
  auto flight_it = in_flight_.find(msg.task_id);
  bool owns = flight_it != in_flight_.end() &&
              flight_it->second.worker_id == msg.worker_id;
  if (owns) {
    in_flight_.erase(flight_it);
    completed_.insert(msg.task_id);
    cache_hits_ += msg.cache_hits;
    busy_seconds_[msg.worker_id] += msg.result.elapsed_seconds;
    trace("COMPLETE task=" + msg.task_id + " worker=" + msg.worker_id +
          " hits=" + std::to_string(msg.cache_hits) + " fetches=" +
          std::to_string(msg.fetches) + " pairs=" +
          std::to_string(msg.result.pairs_compared) + " matches=" +
          std::to_string(msg.result.correspondences.size()));
  } else {
    // Late duplicate after reassignment: the stored result was already
    // validated for consistency above; task bookkeeping stays with the
    // current owner unless the task sits unassigned in the open list.
    auto open_it = std::find_if(open_.begin(), open_.end(),
                                [&](const MatchTask& t) {
                                  return t.id == msg.task_id;
                                });
    if (open_it != open_.end()) {
      open_.erase(open_it);
      completed_.insert(msg.task_id);
    }
    trace("DUPLICATE task=" + msg.task_id + " worker=" + msg.worker_id);
  }

  if (member_it != members_.end()) {
    Member& member = member_it->second;
    member.last_seen = Clock::now();
    member.in_flight.erase(msg.task_id);
    member.cache_status.clear();
    member.cache_status.insert(msg.cached_partition_ids.begin(),
                               msg.cached_partition_ids.end());
    assign_tasks(msg.worker_id);
    drop_if_drained(msg.worker_id);
  }
}

void Coordinator::handle(const TaskFailedMessage& msg) {
  auto flight_it = in_flight_.find(msg.task_id);
  if (flight_it == in_flight_.end() ||
      flight_it->second.worker_id != msg.worker_id) {
    return;
  }
  MatchTask task = flight_it->second.task;
  in_flight_.erase(flight_it);
  auto member_it = members_.find(msg.worker_id);
  if (member_it != members_.end()) {
    member_it->second.in_flight.erase(msg.task_id);
    member_it->second.last_seen = Clock::now();
  }
  std::uint32_t attempts = ++attempts_[msg.task_id];
  trace("TASKFAIL task=" + msg.task_id + " worker=" + msg.worker_id +
        " reason=" + msg.reason);
  if (attempts >= options_.max_task_attempts) {
    abort_run("task " + msg.task_id + " failed " + std::to_string(attempts) +
              " times: " + msg.reason);
    return;
  }
  requeue(std::move(task));
  assign_everywhere();
  if (member_it != members_.end()) drop_if_drained(msg.worker_id);
}

void Coordinator::handle(const WorkerDisconnectedEvent& msg) {
  fail_worker(msg.worker_id, msg.reason);
}

void Coordinator::fail_worker(const std::string& worker_id,
                              const std::string& reason) {
  auto it = members_.find(worker_id);
  if (it == members_.end()) return;
  trace("FAIL worker=" + worker_id + " reason=" + reason);
  std::vector<MatchTask> orphaned;
  for (const auto& task_id : it->second.in_flight) {
    auto flight_it = in_flight_.find(task_id);
    if (flight_it != in_flight_.end()) {
      orphaned.push_back(flight_it->second.task);
      in_flight_.erase(flight_it);
    }
  }
  members_.erase(it);
  // Requeue in original creation order so FIFO tie-breaking is preserved.
  std::sort(orphaned.begin(), orphaned.end(),
            [](const MatchTask& a, const MatchTask& b) { return a.seq < b.seq; });
  for (auto& task : orphaned) requeue(std::move(task));
  assign_everywhere();
}

void Coordinator::check_liveness() {
  auto now = Clock::now();
  std::vector<std::string> expired;
  for (const auto& [worker_id, member] : members_) {
    if (now - member.last_seen > options_.heartbeat_timeout) {
      expired.push_back(worker_id);
    }
  }
  for (const auto& worker_id : expired) {
    fail_worker(worker_id, "heartbeat-timeout");
  }
}

RunOutcome Coordinator::run() {
  const auto start = Clock::now();
  const std::uint64_t start_fetches = store_->total_fetches();
  const std::size_t total_tasks = plan_.tasks.size();
  std::optional<Clock::time_point> no_worker_since;
  if (total_tasks > 0) no_worker_since = start;

  auto tick = std::min<std::chrono::milliseconds>(
      std::chrono::milliseconds(50),
      std::max<std::chrono::milliseconds>(options_.heartbeat_timeout / 4,
                                          std::chrono::milliseconds(1)));

  while (!aborted_ && completed_.size() < total_tasks) {
    if (auto event = inbox_.pop_for(tick)) {
      std::visit([this](auto& msg) { handle(msg); }, *event);
    }
    check_liveness();
    if (members_.empty() && completed_.size() < total_tasks) {
      if (!no_worker_since) no_worker_since = Clock::now();
      if (Clock::now() - *no_worker_since > options_.no_worker_timeout) {
        abort_run("no alive workers with " +
                  std::to_string(total_tasks - completed_.size()) +
                  " tasks unfinished");
      }
    } else {
      no_worker_since.reset();
    }
  }

  for (auto& [worker_id, member] : members_) {
    member.endpoint->send(StopMessage{});
  }
  inbox_.close();

  RunOutcome outcome;
  outcome.trace = trace_;
  auto results = store_->results();
  try {
    outcome.correspondences = merge_results(results);
  } catch (const IntegrityError& e) {
    if (!aborted_) abort_run(e.what());
    outcome.correspondences.clear();
  }
  outcome.ok = !aborted_;
  outcome.error = abort_error_;

  RunMetrics& metrics = outcome.metrics;
  metrics.task_count = total_tasks;
  metrics.partition_count = plan_.partitions.size();
  metrics.total_elapsed_seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  metrics.per_worker_busy_seconds = busy_seconds_;
  for (const auto& result : results) {
    metrics.pairs_compared += result.pairs_compared;
  }
  metrics.fetches = store_->total_fetches() - start_fetches;
  metrics.cache_hits = cache_hits_;
  std::uint64_t accesses = metrics.cache_hits + metrics.fetches;
  metrics.hit_ratio =
      accesses == 0 ? 0.0
                    : static_cast<double>(metrics.cache_hits) /
                          static_cast<double>(accesses);
  metrics.correspondence_count = outcome.correspondences.size();
  outcome.trace.push_back(
      "DONE tasks=" + std::to_string(completed_.size()) + "/" +
      std::to_string(total_tasks) + " fetches=" +
      std::to_string(metrics.fetches) + " hits=" +
      std::to_string(metrics.cache_hits));
  return outcome;
}

// --- InProcessWorker ---

class InProcessWorker::Endpoint : public WorkerEndpoint {
 public:
  explicit Endpoint(std::shared_ptr<Mailbox<WorkerMessage>> inbox)
      : inbox_(std::move(inbox)) {}
  void send(const WorkerMessage& message) override { inbox_->push(message); }

 private:
  std::shared_ptr<Mailbox<WorkerMessage>> inbox_;
};

InProcessWorker::InProcessWorker(WorkerDescriptor descriptor,
                                 std::shared_ptr<DataClient> data,
                                 StrategyTable strategies,
                                 Mailbox<CoordinatorEvent>& coordinator_inbox,
                                 std::chrono::milliseconds heartbeat_interval)
    : descriptor_(std::move(descriptor)),
      data_(std::move(data)),
      strategies_(std::move(strategies)),
      coordinator_inbox_(coordinator_inbox),
      heartbeat_interval_(heartbeat_interval),
      inbox_(std::make_shared<Mailbox<WorkerMessage>>()),
      cache_(descriptor_.cache_capacity) {}

InProcessWorker::~InProcessWorker() { shutdown(); }

void InProcessWorker::start() {
  for (std::uint32_t i = 0; i < descriptor_.thread_count; ++i) {
    threads_.emplace_back([this] { executor_loop(); });
  }
  threads_.emplace_back([this] { heartbeat_loop(); });
  coordinator_inbox_.push(
      WorkerJoinEvent{descriptor_, std::make_shared<Endpoint>(inbox_)});
}

void InProcessWorker::leave() {
  coordinator_inbox_.push(LeaveMessage{descriptor_.worker_id});
}

void InProcessWorker::crash() {
  crashed_.store(true);
  {
    std::lock_guard lock(stop_mutex_);
    stopping_.store(true);
  }
  stop_cv_.notify_all();
  inbox_->close();
}

void InProcessWorker::shutdown() {
  {
    std::lock_guard lock(stop_mutex_);
    stopping_.store(true);
  }
  stop_cv_.notify_all();
  inbox_->close();
  for (auto& thread : threads_) {
    if (thread.joinable()) thread.join();
  }
  threads_.clear();
}

void InProcessWorker::executor_loop() {
  while (auto message = inbox_->pop()) {
    if (crashed_.load()) break;
    if (std::holds_alternative<StopMessage>(*message)) {
      inbox_->close();
      break;
    }
    if (const auto* setup = std::get_if<SetupMessage>(&*message)) {
      std::lock_guard lock(strategies_mutex_);
      for (const auto& strategy : setup->strategies) {
        strategies_.emplace(strategy.id, strategy);
      }
      continue;
    }
    process(std::get<AssignTaskMessage>(*message));
  }
}

void InProcessWorker::process(const AssignTaskMessage& assign) {
  try {
    std::uint64_t hits = 0;
    std::uint64_t fetches = 0;
    PayloadPtr payload_a = acquire(assign.partition_a, hits, fetches);
    PayloadPtr payload_b =
        assign.self_task ? payload_a
                         : acquire(assign.partition_b, hits, fetches);
    MatchStrategy strategy;
    {
      std::lock_guard lock(strategies_mutex_);
      auto it = strategies_.find(assign.strategy_id);
      if (it == strategies_.end()) {
        throw NotFoundError("unknown strategy " + assign.strategy_id);
      }
      strategy = it->second;
    }
    MatchResult result = evaluate_partition_pair(
        strategy, assign.task_id, payload_a->entities, payload_b->entities,
        assign.self_task);
    CompletionMessage done;
    done.worker_id = descriptor_.worker_id;
    done.task_id = assign.task_id;
    done.result = std::move(result);
    done.cached_partition_ids = cache_.resident_ids();
    done.cache_hits = hits;
    done.fetches = fetches;
    if (!crashed_.load()) coordinator_inbox_.push(std::move(done));
  } catch (const std::exception& e) {
    if (!crashed_.load()) {
      coordinator_inbox_.push(TaskFailedMessage{descriptor_.worker_id,
                                                assign.task_id, e.what()});
    }
  }
}

PayloadPtr InProcessWorker::acquire(const std::string& partition_id,
                                    std::uint64_t& hits,
                                    std::uint64_t& fetches) {
  if (PayloadPtr cached = cache_.get(partition_id)) {
    ++hits;
    return cached;
  }
  PayloadPtr payload = data_->fetch(partition_id);
  ++fetches;
  cache_.put(partition_id, payload);
  return payload;
}

void InProcessWorker::heartbeat_loop() {
  std::unique_lock lock(stop_mutex_);
  while (!stopping_.load()) {
    stop_cv_.wait_for(lock, heartbeat_interval_,
                      [this] { return stopping_.load(); });
    if (stopping_.load() || crashed_.load()) break;
    coordinator_inbox_.push(HeartbeatMessage{descriptor_.worker_id});
  }
}

RunOutcome run_workflow(const PartitionPlan& plan,
                        const MatchStrategy& strategy,
                        std::shared_ptr<DataStore> store,
                        const std::vector<WorkerDescriptor>& workers,
                        EngineOptions options) {
  store->register_plan(plan);
  StrategyTable strategies{{strategy.id, strategy}};
  Coordinator coordinator(plan, strategies, store, options);
  std::vector<std::unique_ptr<InProcessWorker>> pool;
  for (const auto& descriptor : workers) {
    pool.push_back(std::make_unique<InProcessWorker>(
        descriptor, std::make_shared<LocalDataClient>(store), strategies,
        coordinator.inbox(), options.heartbeat_interval));
  }
  for (auto& worker : pool) worker->start();
  RunOutcome outcome = coordinator.run();
  for (auto& worker : pool) worker->shutdown();
  return outcome;
}

}  // namespace parmatch
