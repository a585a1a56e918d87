#include "parmatch/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "parmatch/error.hpp"

namespace parmatch {
namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : value) {
    if (c == ',') {
      parts.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(trim(current));
  parts.erase(std::remove_if(parts.begin(), parts.end(),
                             [](const std::string& p) { return p.empty(); }),
              parts.end());
  return parts;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double out = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

std::vector<double> parse_doubles(const std::string& key,
                                  const std::string& value) {
  std::vector<double> out;
  for (const auto& part : split_list(value)) {
    out.push_back(parse_double(key, part));
  }
  return out;
}

std::vector<SimilarityMeasure> parse_matchers(const std::string& key,
                                              const std::string& value) {
  std::vector<SimilarityMeasure> out;
  for (const auto& part : split_list(value)) {
    auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw ConfigError(key + ": expected kind:attribute, got '" + part + "'");
    }
    out.push_back({parse_measure_kind(trim(part.substr(0, colon))),
                   trim(part.substr(colon + 1))});
  }
  if (out.empty()) throw ConfigError(key + ": empty matcher list");
  return out;
}

WeightedAverage& as_wam(RunConfig& config, const std::string& key) {
  auto* wam = std::get_if<WeightedAverage>(&config.strategy.combiner);
  if (wam == nullptr) {
    throw ConfigError(key + ": strategy combiner is not weightedAverage");
  }
  return *wam;
}

LogisticRegression& as_lrm(RunConfig& config, const std::string& key) {
  auto* lrm = std::get_if<LogisticRegression>(&config.strategy.combiner);
  if (lrm == nullptr) {
    throw ConfigError(key + ": strategy combiner is not logisticRegression");
  }
  return *lrm;
}

}  // namespace

std::uint64_t parse_byte_size(const std::string& text) {
  std::string value = trim(text);
  std::uint64_t multiplier = 1;
  auto strip = [&](const char* suffix, std::uint64_t factor) {
    std::size_t len = std::strlen(suffix);
    if (value.size() > len &&
        value.compare(value.size() - len, len, suffix) == 0) {
      value = trim(value.substr(0, value.size() - len));
      multiplier = factor;
      return true;
    }
    return false;
  };
  strip("GB", 1'000'000'000) || strip("MB", 1'000'000) || strip("KB", 1'000) ||
      strip("B", 1);
  return parse_u64("byte size", value) * multiplier;
}

RunConfig default_run_config() {
  RunConfig config;
  config.strategy = default_wam_strategy();
  return config;
}

void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value) {
  if (key == "input") {
    if (config.inputs.empty()) config.inputs.push_back({"", "A"});
    config.inputs[0].path = value;
  } else if (key == "input.source") {
    if (config.inputs.empty()) config.inputs.push_back({"", "A"});
    config.inputs[0].source_id = value;
  } else if (key == "input.b") {
    if (config.inputs.empty()) config.inputs.push_back({"", "A"});
    if (config.inputs.size() < 2) config.inputs.push_back({"", "B"});
    config.inputs[1].path = value;
  } else if (key == "input.b.source") {
    if (config.inputs.size() < 2) {
      throw ConfigError("input.b.source: set input.b first");
    }
    config.inputs[1].source_id = value;
  } else if (key == "schema.id") {
    config.id_column = value;
  } else if (key == "schema.blocking") {
    config.blocking_column = value;
  } else if (key == "schema.delimiter") {
    if (value == "comma") {
      config.delimiter = ',';
    } else if (value == "tab") {
      config.delimiter = '\t';
    } else {
      throw ConfigError("schema.delimiter: expected comma or tab");
    }
  } else if (key == "mode") {
    if (value == "sizeBased") {
      config.mode = PlanMode::SizeBased;
    } else if (value == "blockingBased") {
      config.mode = PlanMode::BlockingBased;
    } else {
      throw ConfigError("mode: expected sizeBased or blockingBased");
    }
  } else if (key == "sizing.max_mem") {
    config.max_mem_per_node = parse_byte_size(value);
  } else if (key == "sizing.threads") {
    config.sizing_threads = static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "sizing.m") {
    config.explicit_m = parse_u64(key, value);
  } else if (key == "tuning.min_size_fraction") {
    config.min_size_fraction = parse_double(key, value);
  } else if (key == "strategy.preset") {
    if (value == "wam") {
      config.strategy = default_wam_strategy();
    } else if (value == "lrm") {
      config.strategy = default_lrm_strategy();
    } else {
      throw ConfigError("strategy.preset: expected wam or lrm");
    }
  } else if (key == "strategy.id") {
    config.strategy.id = value;
  } else if (key == "strategy.matchers") {
    config.strategy.matchers = parse_matchers(key, value);
  } else if (key == "strategy.type") {
    if (value == "weightedAverage") {
      config.strategy.combiner = WeightedAverage{
          std::vector<double>(config.strategy.matchers.size(),
                              1.0 / config.strategy.matchers.size()),
          0.75, true};
    } else if (value == "logisticRegression") {
      config.strategy.combiner = LogisticRegression{
          0.0, std::vector<double>(config.strategy.matchers.size(), 1.0), 0.5};
    } else {
      throw ConfigError(
          "strategy.type: expected weightedAverage or logisticRegression");
    }
  } else if (key == "strategy.weights") {
    as_wam(config, key).weights = parse_doubles(key, value);
  } else if (key == "strategy.threshold") {
    as_wam(config, key).threshold = parse_double(key, value);
  } else if (key == "strategy.pruning") {
    as_wam(config, key).pruning_enabled = parse_bool(key, value);
  } else if (key == "strategy.intercept") {
    as_lrm(config, key).intercept = parse_double(key, value);
  } else if (key == "strategy.coefficients") {
    as_lrm(config, key).coefficients = parse_doubles(key, value);
  } else if (key == "strategy.decision_threshold") {
    as_lrm(config, key).decision_threshold = parse_double(key, value);
  } else if (key == "strategy.pair_cost") {
    config.strategy.pair_memory_cost = parse_u64(key, value);
  } else if (key == "engine.workers") {
    config.workers = static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "engine.threads") {
    config.threads = static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "engine.cache") {
    config.cache_capacity = static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "engine.heartbeat_interval_ms") {
    config.engine.heartbeat_interval =
        std::chrono::milliseconds(parse_u64(key, value));
  } else if (key == "engine.heartbeat_timeout_ms") {
    config.engine.heartbeat_timeout =
        std::chrono::milliseconds(parse_u64(key, value));
  } else if (key == "engine.no_worker_timeout_ms") {
    config.engine.no_worker_timeout =
        std::chrono::milliseconds(parse_u64(key, value));
  } else if (key == "engine.max_task_attempts") {
    config.engine.max_task_attempts =
        static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "run.duplicate_free") {
    config.duplicate_free = parse_bool(key, value);
  } else if (key == "run.seed") {
    config.seed = parse_u64(key, value);
  } else if (key == "run.out_dir") {
    config.out_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_config_text(RunConfig& config, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    apply_config_entry(config, trim(line.substr(0, eq)),
                       trim(line.substr(eq + 1)));
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  RunConfig config = default_run_config();
  apply_config_text(config, in);
  return config;
}

void validate_config(const RunConfig& config) {
  if (config.mode == PlanMode::BlockingBased && !config.blocking_column) {
    throw ConfigError(
        "schema.blocking: blocking-based mode requires a blocking column");
  }
  if (config.workers == 0) throw ConfigError("engine.workers: must be >= 1");
  if (config.threads == 0) throw ConfigError("engine.threads: must be >= 1");
  if (config.min_size_fraction < 0.0 || config.min_size_fraction > 1.0) {
    throw ConfigError("tuning.min_size_fraction: must be in [0,1]");
  }
  if (config.explicit_m && *config.explicit_m == 0) {
    throw ConfigError("sizing.m: must be >= 1");
  }
  if (config.inputs.size() > 2) {
    throw ConfigError("input: at most two sources are supported");
  }
  if (config.inputs.size() == 2 &&
      config.inputs[0].source_id == config.inputs[1].source_id) {
    throw ConfigError("input.b.source: sources must have distinct labels");
  }
}

std::uint64_t resolve_max_partition_size(const RunConfig& config) {
  if (config.explicit_m) return *config.explicit_m;
  std::uint32_t threads =
      config.sizing_threads == 0 ? config.threads : config.sizing_threads;
  return max_partition_size(
      {config.max_mem_per_node, threads, config.strategy.pair_memory_cost});
}

}  // namespace parmatch
