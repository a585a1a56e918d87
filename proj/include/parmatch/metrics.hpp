#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace parmatch {

// Measured quantities of one workflow run. hit_ratio is
// cache_hits / (cache_hits + fetches) when any access happened, else 0.
struct RunMetrics {
  std::uint64_t task_count = 0;
  std::uint64_t partition_count = 0;
  double total_elapsed_seconds = 0.0;  // matching phase only
  std::map<std::string, double> per_worker_busy_seconds;
  std::uint64_t pairs_compared = 0;
  std::uint64_t fetches = 0;
  std::uint64_t cache_hits = 0;
  double hit_ratio = 0.0;
  std::uint64_t correspondence_count = 0;
  std::optional<double> speedup_baseline_seconds;
};

std::string metrics_to_json(const RunMetrics& metrics);

}  // namespace parmatch
