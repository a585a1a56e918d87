#pragma once

#include <atomic>
#include <chrono>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "parmatch/data_service.hpp"
#include "parmatch/lru_cache.hpp"
#include "parmatch/mailbox.hpp"
#include "parmatch/messages.hpp"
#include "parmatch/metrics.hpp"
#include "parmatch/model.hpp"
#include "parmatch/partitioning.hpp"

namespace parmatch {

struct EngineOptions {
  std::chrono::milliseconds heartbeat_interval{1000};
  std::chrono::milliseconds heartbeat_timeout{5000};
  // How long the run may sit with open tasks and no alive worker before it
  // aborts with partial results.
  std::chrono::milliseconds no_worker_timeout{10000};
  std::uint32_t max_task_attempts = 5;
};

struct RunOutcome {
  bool ok = false;
  std::string error;
  std::vector<Correspondence> correspondences;  // merged, sorted
  RunMetrics metrics;
  std::vector<std::string> trace;
};

// A worker announcing itself, carrying the channel back to it.
struct WorkerJoinEvent {
  WorkerDescriptor descriptor;
  std::shared_ptr<WorkerEndpoint> endpoint;
};

// Transport-level loss of a worker (socket closed); treated like a failure
// without waiting for the heartbeat deadline.
struct WorkerDisconnectedEvent {
  std::string worker_id;
  std::string reason;
};

using CoordinatorEvent =
    std::variant<WorkerJoinEvent, LeaveMessage, HeartbeatMessage,
                 CompletionMessage, TaskFailedMessage, WorkerDisconnectedEvent>;

// Affinity-based task selection: picks the open task with the most input
// partitions present in the worker's (approximate) cache status, FIFO by
// creation order on ties. Returns the index into open_tasks.
std::optional<std::size_t> select_task(std::span<const MatchTask> open_tasks,
                                       const std::set<std::string>& cached);

// The workflow service: owns the task list, the approximate cache-status
// map and worker membership, and drives scheduling. All state is mutated
// by the single thread inside run(), reacting to inbox events.
class Coordinator {
 public:
  Coordinator(PartitionPlan plan, StrategyTable strategies,
              std::shared_ptr<DataStore> store, EngineOptions options = {});

  Mailbox<CoordinatorEvent>& inbox() { return inbox_; }

  // Blocks until every task completed or the run aborted.
  RunOutcome run();

 private:
  struct Member {
    WorkerDescriptor descriptor;
    std::shared_ptr<WorkerEndpoint> endpoint;
    std::set<std::string> in_flight;
    std::set<std::string> cache_status;
    std::chrono::steady_clock::time_point last_seen;
    bool draining = false;
  };

  struct InFlight {
    MatchTask task;
    std::string worker_id;
  };

  void handle(WorkerJoinEvent& event);
  void handle(const LeaveMessage& msg);
  void handle(const HeartbeatMessage& msg);
  void handle(const CompletionMessage& msg);
  void handle(const TaskFailedMessage& msg);
  void handle(const WorkerDisconnectedEvent& msg);
  void assign_tasks(const std::string& worker_id);
  void assign_everywhere();
  void fail_worker(const std::string& worker_id, const std::string& reason);
  void requeue(MatchTask task);
  void drop_if_drained(const std::string& worker_id);
  void check_liveness();
  void abort_run(const std::string& error);
  void trace(std::string line);

  PartitionPlan plan_;
  StrategyTable strategies_;
  std::shared_ptr<DataStore> store_;
  EngineOptions options_;
  Mailbox<CoordinatorEvent> inbox_;

  std::map<std::string, Member> members_;
  std::list<MatchTask> open_;  // kept sorted by creation seq
  std::map<std::string, InFlight> in_flight_;
  std::set<std::string> completed_;
  std::map<std::string, std::uint32_t> attempts_;

  std::uint64_t cache_hits_ = 0;
  std::map<std::string, double> busy_seconds_;
  std::vector<std::string> trace_;
  bool aborted_ = false;
  std::string abort_error_;
};

// A match service running thread_count executor threads that share one LRU
// partition cache. Communicates with the coordinator through messages
// only; partition payloads come from the data client.
class InProcessWorker {
 public:
  InProcessWorker(WorkerDescriptor descriptor,
                  std::shared_ptr<DataClient> data, StrategyTable strategies,
                  Mailbox<CoordinatorEvent>& coordinator_inbox,
                  std::chrono::milliseconds heartbeat_interval =
                      std::chrono::milliseconds{1000});
  ~InProcessWorker();

  InProcessWorker(const InProcessWorker&) = delete;
  InProcessWorker& operator=(const InProcessWorker&) = delete;

  void start();  // spawns threads and sends the join event
  void leave();  // graceful: finish in-flight work, then drop out
  void crash();  // test hook: stop communicating immediately
  void shutdown();

  const std::string& id() const { return descriptor_.worker_id; }

 private:
  class Endpoint;

  void executor_loop();
  void heartbeat_loop();
  void process(const AssignTaskMessage& assign);
  PayloadPtr acquire(const std::string& partition_id, std::uint64_t& hits,
                     std::uint64_t& fetches);

  WorkerDescriptor descriptor_;
  std::shared_ptr<DataClient> data_;
  StrategyTable strategies_;
  std::mutex strategies_mutex_;
  Mailbox<CoordinatorEvent>& coordinator_inbox_;
  std::chrono::milliseconds heartbeat_interval_;
  std::shared_ptr<Mailbox<WorkerMessage>> inbox_;
  PartitionCache cache_;
  std::vector<std::thread> threads_;
  std::atomic<bool> crashed_{false};
  std::atomic<bool> stopping_{false};
  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;
};

// Convenience entry point for in-process execution: registers the plan,
// spins up one InProcessWorker per descriptor, runs the workflow and tears
// everything down.
RunOutcome run_workflow(const PartitionPlan& plan,
                        const MatchStrategy& strategy,
                        std::shared_ptr<DataStore> store,
                        const std::vector<WorkerDescriptor>& workers,
                        EngineOptions options = {});

}  // namespace parmatch
