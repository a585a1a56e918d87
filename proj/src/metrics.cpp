#include "parmatch/metrics.hpp"

#include <json.hpp>

namespace parmatch {

std::string metrics_to_json(const RunMetrics& metrics) {
  nlohmann::json j;
  j["taskCount"] = metrics.task_count;
  j["partitionCount"] = metrics.partition_count;
  j["totalElapsedSeconds"] = metrics.total_elapsed_seconds;
  j["perWorkerBusySeconds"] = metrics.per_worker_busy_seconds;
  j["pairsCompared"] = metrics.pairs_compared;
  j["fetches"] = metrics.fetches;
  j["cacheHits"] = metrics.cache_hits;
  j["hitRatio"] = metrics.hit_ratio;
  j["correspondenceCount"] = metrics.correspondence_count;
  if (metrics.speedup_baseline_seconds) {
    j["speedupBaselineSeconds"] = *metrics.speedup_baseline_seconds;
  }
  return j.dump(2) + "\n";
}

}  // namespace parmatch
