#include "parmatch/messages.hpp"

#include <json.hpp>

#include "parmatch/error.hpp"

namespace parmatch {
namespace {

using nlohmann::json;

json strategy_to_json(const MatchStrategy& strategy) {
  json matchers = json::array();
  for (const auto& m : strategy.matchers) {
    matchers.push_back({{"kind", to_string(m.kind)}, {"attribute", m.attribute}});
  }
  json combiner;
  if (const auto* wam = std::get_if<WeightedAverage>(&strategy.combiner)) {
    combiner = {{"type", "weightedAverage"},
                {"weights", wam->weights},
                {"threshold", wam->threshold},
                {"pruning", wam->pruning_enabled}};
  } else {
    const auto& lrm = std::get<LogisticRegression>(strategy.combiner);
    combiner = {{"type", "logisticRegression"},
                {"intercept", lrm.intercept},
                {"coefficients", lrm.coefficients},
                {"decisionThreshold", lrm.decision_threshold}};
  }
  return {{"id", strategy.id},
          {"matchers", matchers},
          {"combiner", combiner},
          {"pairCost", strategy.pair_memory_cost}};
}

MatchStrategy strategy_from_json(const json& j) {
  MatchStrategy strategy;
  strategy.id = j.at("id").get<std::string>();
  for (const auto& m : j.at("matchers")) {
    strategy.matchers.push_back(
        {parse_measure_kind(m.at("kind").get<std::string>()),
         m.at("attribute").get<std::string>()});
  }
  const auto& combiner = j.at("combiner");
  std::string type = combiner.at("type").get<std::string>();
  if (type == "weightedAverage") {
    strategy.combiner = WeightedAverage{
        combiner.at("weights").get<std::vector<double>>(),
        combiner.at("threshold").get<double>(),
        combiner.at("pruning").get<bool>()};
  } else if (type == "logisticRegression") {
    strategy.combiner = LogisticRegression{
        combiner.at("intercept").get<double>(),
        combiner.at("coefficients").get<std::vector<double>>(),
        combiner.at("decisionThreshold").get<double>()};
  } else {
    throw TransportError("unknown combiner type: " + type);
  }
  strategy.pair_memory_cost = j.at("pairCost").get<std::uint64_t>();
  return strategy;
}

json result_to_json(const MatchResult& result) {
  json correspondences = json::array();
  for (const auto& c : result.correspondences) {
    correspondences.push_back(
        {c.a.source_id, c.a.id, c.b.source_id, c.b.id, c.sim});
  }
  return {{"taskId", result.task_id},
          {"correspondences", correspondences},
          {"pairsCompared", result.pairs_compared},
          {"elapsedSeconds", result.elapsed_seconds}};
}

MatchResult result_from_json(const json& j) {
  MatchResult result;
  result.task_id = j.at("taskId").get<std::string>();
  for (const auto& row : j.at("correspondences")) {
    Correspondence c;
    c.a = EntityKey{row.at(0).get<std::string>(), row.at(1).get<std::string>()};
    c.b = EntityKey{row.at(2).get<std::string>(), row.at(3).get<std::string>()};
    c.sim = row.at(4).get<double>();
    result.correspondences.push_back(std::move(c));
  }
  result.pairs_compared = j.at("pairsCompared").get<std::uint64_t>();
  result.elapsed_seconds = j.at("elapsedSeconds").get<double>();
  return result;
}

json parse(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("type")) {
    throw TransportError("malformed message frame");
  }
  return j;
}

}  // namespace

std::string encode_worker_message(const WorkerMessage& message) {
  json j;
  if (const auto* setup = std::get_if<SetupMessage>(&message)) {
    json strategies = json::array();
    for (const auto& s : setup->strategies) strategies.push_back(strategy_to_json(s));
    j = {{"type", "setup"},
         {"strategies", strategies},
         {"heartbeatIntervalMs", setup->heartbeat_interval_ms}};
  } else if (const auto* assign = std::get_if<AssignTaskMessage>(&message)) {
    j = {{"type", "assignTask"},
         {"taskId", assign->task_id},
         {"partitionA", assign->partition_a},
         {"partitionB", assign->partition_b},
         {"selfTask", assign->self_task},
         {"strategyId", assign->strategy_id}};
  } else {
    j = {{"type", "stop"}};
  }
  return j.dump();
}

WorkerMessage decode_worker_message(const std::string& text) {
  json j = parse(text);
  std::string type = j.at("type").get<std::string>();
  try {
    if (type == "setup") {
      SetupMessage setup;
      for (const auto& s : j.at("strategies")) {
        setup.strategies.push_back(strategy_from_json(s));
      }
      setup.heartbeat_interval_ms =
          j.at("heartbeatIntervalMs").get<std::uint32_t>();
      return setup;
    }
    if (type == "assignTask") {
      return AssignTaskMessage{j.at("taskId").get<std::string>(),
                               j.at("partitionA").get<std::string>(),
                               j.at("partitionB").get<std::string>(),
                               j.at("selfTask").get<bool>(),
                               j.at("strategyId").get<std::string>()};
    }
    if (type == "stop") return StopMessage{};
  } catch (const json::exception& e) {
    throw TransportError(std::string("bad worker message: ") + e.what());
  }
  throw TransportError("unknown worker message type: " + type);
}

std::string encode_coordinator_message(const CoordinatorWireMessage& message) {
  json j;
  if (const auto* join = std::get_if<JoinMessage>(&message)) {
    j = {{"type", "join"},
         {"workerId", join->descriptor.worker_id},
         {"threads", join->descriptor.thread_count},
         {"cache", join->descriptor.cache_capacity}};
  } else if (const auto* leave = std::get_if<LeaveMessage>(&message)) {
    j = {{"type", "leave"}, {"workerId", leave->worker_id}};
  } else if (const auto* hb = std::get_if<HeartbeatMessage>(&message)) {
    j = {{"type", "heartbeat"}, {"workerId", hb->worker_id}};
  } else if (const auto* done = std::get_if<CompletionMessage>(&message)) {
    j = {{"type", "completion"},
         {"workerId", done->worker_id},
         {"taskId", done->task_id},
         {"result", result_to_json(done->result)},
         {"cachedPartitionIds", done->cached_partition_ids},
         {"cacheHits", done->cache_hits},
         {"fetches", done->fetches}};
  } else {
    const auto& failed = std::get<TaskFailedMessage>(message);
    j = {{"type", "taskFailed"},
         {"workerId", failed.worker_id},
         {"taskId", failed.task_id},
         {"reason", failed.reason}};
  }
  return j.dump();
}

CoordinatorWireMessage decode_coordinator_message(const std::string& text) {
  json j = parse(text);
  std::string type = j.at("type").get<std::string>();
  try {
    if (type == "join") {
      return JoinMessage{WorkerDescriptor{
          j.at("workerId").get<std::string>(),
          j.at("threads").get<std::uint32_t>(),
          j.at("cache").get<std::uint32_t>()}};
    }
    if (type == "leave") {
      return LeaveMessage{j.at("workerId").get<std::string>()};
    }
    if (type == "heartbeat") {
      return HeartbeatMessage{j.at("workerId").get<std::string>()};
    }
    if (type == "completion") {
      CompletionMessage done;
      done.worker_id = j.at("workerId").get<std::string>();
      done.task_id = j.at("taskId").get<std::string>();
      done.result = result_from_json(j.at("result"));
      done.cached_partition_ids =
          j.at("cachedPartitionIds").get<std::vector<std::string>>();
      done.cache_hits = j.at("cacheHits").get<std::uint64_t>();
      done.fetches = j.at("fetches").get<std::uint64_t>();
      return done;
    }
    if (type == "taskFailed") {
      return TaskFailedMessage{j.at("workerId").get<std::string>(),
                               j.at("taskId").get<std::string>(),
                               j.at("reason").get<std::string>()};
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("bad coordinator message: ") + e.what());
  }
  throw TransportError("unknown coordinator message type: " + type);
}

}  // namespace parmatch
