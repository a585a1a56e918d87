#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "parmatch/engine.hpp"
#include "parmatch/partitioning.hpp"
#include "parmatch/strategy.hpp"

namespace parmatch {

struct InputSpec {
  std::string path;
  std::string source_id;
};

// Complete run description. Assembled from a flat key=value config file,
// then overridable by CLI flags.
struct RunConfig {
  std::vector<InputSpec> inputs;  // one source, or two for cross matching
  std::string id_column = "id";
  std::optional<std::string> blocking_column;
  char delimiter = ',';

  PlanMode mode = PlanMode::SizeBased;
  std::optional<std::uint64_t> explicit_m;  // overrides the sizing formula
  std::uint64_t max_mem_per_node = 2'000'000'000;  // bytes, decimal
  std::uint32_t sizing_threads = 0;  // 0 = use engine threads
  double min_size_fraction = 0.3;

  MatchStrategy strategy;

  std::uint32_t workers = 1;
  std::uint32_t threads = 1;
  std::uint32_t cache_capacity = 0;

  bool duplicate_free = false;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  bool dry_run = false;

  EngineOptions engine;
};

RunConfig default_run_config();

// Applies one flat config entry; throws ConfigError naming the key on
// unknown keys or unparsable values.
void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value);

// `key = value` lines; '#' starts a comment; blank lines ignored.
void apply_config_text(RunConfig& config, std::istream& in);
RunConfig load_config_file(const std::string& path);

// Cross-field validation (e.g. blocking mode requires a blocking column).
void validate_config(const RunConfig& config);

// Explicit m when configured, otherwise the memory-bounded formula with
// the strategy's declared pair cost.
std::uint64_t resolve_max_partition_size(const RunConfig& config);

// Parses sizes like "500MB" or plain byte counts (decimal units).
std::uint64_t parse_byte_size(const std::string& text);

}  // namespace parmatch
