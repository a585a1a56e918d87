#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "parmatch/model.hpp"
#include "parmatch/strategy.hpp"

namespace parmatch {

struct WorkerDescriptor {
  std::string worker_id;
  std::uint32_t thread_count = 1;
  std::uint32_t cache_capacity = 0;  // c; 0 disables caching
};

using StrategyTable = std::map<std::string, MatchStrategy>;

// --- coordinator -> worker ---

struct SetupMessage {
  std::vector<MatchStrategy> strategies;
  std::uint32_t heartbeat_interval_ms = 1000;
};

struct AssignTaskMessage {
  std::string task_id;
  std::string partition_a;
  std::string partition_b;
  bool self_task = false;
  std::string strategy_id;
};

struct StopMessage {};

using WorkerMessage =
    std::variant<SetupMessage, AssignTaskMessage, StopMessage>;

// --- worker -> coordinator ---

struct JoinMessage {
  WorkerDescriptor descriptor;
};

struct LeaveMessage {
  std::string worker_id;
};

struct HeartbeatMessage {
  std::string worker_id;
};

// Match result plus the piggybacked cache snapshot, so the coordinator can
// maintain its approximate cache status without extra messages.
struct CompletionMessage {
  std::string worker_id;
  std::string task_id;
  MatchResult result;
  std::vector<std::string> cached_partition_ids;
  std::uint64_t cache_hits = 0;
  std::uint64_t fetches = 0;
};

struct TaskFailedMessage {
  std::string worker_id;
  std::string task_id;
  std::string reason;
};

// Channel the coordinator uses to reach one worker.
class WorkerEndpoint {
 public:
  virtual ~WorkerEndpoint() = default;
  virtual void send(const WorkerMessage& message) = 0;
};

using CoordinatorWireMessage =
    std::variant<JoinMessage, LeaveMessage, HeartbeatMessage,
                 CompletionMessage, TaskFailedMessage>;

// JSON encoding used by the socket transport. Decoders throw
// TransportError on malformed input.
std::string encode_worker_message(const WorkerMessage& message);
WorkerMessage decode_worker_message(const std::string& text);
std::string encode_coordinator_message(const CoordinatorWireMessage& message);
CoordinatorWireMessage decode_coordinator_message(const std::string& text);

}  // namespace parmatch
