// Command-line front end: run workflows (in-process or distributed),
// generate synthetic datasets, and run the speedup experiment.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "parmatch/config.hpp"
#include "parmatch/engine.hpp"
#include "parmatch/error.hpp"
#include "parmatch/metrics.hpp"
#include "parmatch/synthetic.hpp"
#include "parmatch/transport.hpp"
#include "parmatch/workflow.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;  // bad config or input; message names the field
constexpr int kExitRunFailed = 3;

struct CommonRunOptions {
  std::string config_path;
  std::vector<std::string> inputs;
  std::string mode;
  std::string max_mem;
  std::uint32_t threads = 0;
  std::uint32_t workers = 0;
  std::int64_t cache = -1;
  double min_size_fraction = -1.0;
  std::string strategy_preset;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  std::string id_column;
  std::string blocking_column;
  std::uint64_t explicit_m = 0;
  bool duplicate_free = false;
  bool dry_run = false;
};

void add_run_options(CLI::App* cmd, CommonRunOptions& opts) {
  cmd->add_option("--config", opts.config_path, "config file (key = value)");
  cmd->add_option("--input", opts.inputs,
                  "input CSV (repeat for a second source)")
      ->expected(0, 2);
  cmd->add_option("--mode", opts.mode, "sizeBased | blockingBased");
  cmd->add_option("--max-mem", opts.max_mem,
                  "memory budget per node, e.g. 2GB");
  cmd->add_option("--threads", opts.threads, "threads per worker");
  cmd->add_option("--workers", opts.workers, "worker count");
  cmd->add_option("--cache", opts.cache, "cached partitions per worker (c)");
  cmd->add_option("--min-size-fraction", opts.min_size_fraction,
                  "min partition size as a fraction of m");
  cmd->add_option("--strategy", opts.strategy_preset, "wam | lrm");
  cmd->add_option("--seed", opts.seed, "seed recorded for reproducibility")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--out-dir", opts.out_dir, "artifact directory");
  cmd->add_option("--id-column", opts.id_column, "id column name");
  cmd->add_option("--blocking-column", opts.blocking_column,
                  "blocking key column");
  cmd->add_option("--m", opts.explicit_m, "explicit max partition size");
  cmd->add_flag("--duplicate-free", opts.duplicate_free,
                "two sources are each internally duplicate-free");
  cmd->add_flag("--dry-run", opts.dry_run, "plan only, no matching");
}

parmatch::RunConfig make_config(const CommonRunOptions& opts) {
  parmatch::RunConfig config = opts.config_path.empty()
                                   ? parmatch::default_run_config()
                                   : parmatch::load_config_file(opts.config_path);
  for (std::size_t i = 0; i < opts.inputs.size(); ++i) {
    parmatch::apply_config_entry(config, i == 0 ? "input" : "input.b",
                                 opts.inputs[i]);
  }
  if (!opts.mode.empty()) {
    parmatch::apply_config_entry(config, "mode", opts.mode);
  }
  if (!opts.max_mem.empty()) {
    config.max_mem_per_node = parmatch::parse_byte_size(opts.max_mem);
  }
  if (opts.threads > 0) config.threads = opts.threads;
  if (opts.workers > 0) config.workers = opts.workers;
  if (opts.cache >= 0) {
    config.cache_capacity = static_cast<std::uint32_t>(opts.cache);
  }
  if (opts.min_size_fraction >= 0.0) {
    config.min_size_fraction = opts.min_size_fraction;
  }
  if (!opts.strategy_preset.empty()) {
    parmatch::apply_config_entry(config, "strategy.preset",
                                 opts.strategy_preset);
  }
  if (opts.seed_set) config.seed = opts.seed;
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (!opts.id_column.empty()) config.id_column = opts.id_column;
  if (!opts.blocking_column.empty()) {
    config.blocking_column = opts.blocking_column;
  }
  if (opts.explicit_m > 0) config.explicit_m = opts.explicit_m;
  if (opts.duplicate_free) config.duplicate_free = true;
  if (opts.dry_run) config.dry_run = true;
  return config;
}

int do_run(const CommonRunOptions& opts) {
  parmatch::RunConfig config = make_config(opts);
  parmatch::RunArtifacts artifacts = parmatch::run_from_config(config);
  if (config.dry_run) {
    parmatch::write_plan_tables(std::cout, artifacts.plan);
    std::cout << "plan report: " << artifacts.plan_file << "\n";
    return kExitOk;
  }
  const auto& metrics = artifacts.outcome.metrics;
  std::cout << "tasks: " << metrics.task_count
            << "  partitions: " << metrics.partition_count
            << "  pairs: " << metrics.pairs_compared
            << "  correspondences: " << metrics.correspondence_count << "\n"
            << "elapsed: " << metrics.total_elapsed_seconds << " s"
            << "  fetches: " << metrics.fetches
            << "  hits: " << metrics.cache_hits
            << "  hr: " << metrics.hit_ratio << "\n"
            << "artifacts: " << artifacts.result_file << ", "
            << artifacts.metrics_file << ", " << artifacts.plan_file << ", "
            << artifacts.trace_file << "\n";
  if (!artifacts.outcome.ok) {
    std::cerr << "run failed: " << artifacts.outcome.error << "\n";
    return kExitRunFailed;
  }
  return kExitOk;
}

int do_serve(const CommonRunOptions& opts, std::uint16_t listen_port,
             std::uint16_t data_port) {
  parmatch::RunConfig config = make_config(opts);
  parmatch::validate_config(config);
  auto store = std::make_shared<parmatch::DataStore>();
  parmatch::load_inputs(config, *store);
  parmatch::validate_strategy(config.strategy, store->schema_columns());
  parmatch::PartitionPlan plan = parmatch::build_plan(config, *store);
  store->register_plan(plan);

  parmatch::StrategyTable strategies{{config.strategy.id, config.strategy}};
  parmatch::Coordinator coordinator(plan, strategies, store, config.engine);
  parmatch::CoordinatorServer control(coordinator.inbox(), listen_port);
  parmatch::DataServiceServer data(store, data_port);
  std::cout << "coordinator listening on port " << control.port()
            << ", data service on port " << data.port() << "\n";

  parmatch::RunOutcome outcome = coordinator.run();
  control.stop();
  data.stop();

  std::filesystem::create_directories(config.out_dir);
  std::ofstream result(
      (std::filesystem::path(config.out_dir) / "result.csv").string(),
      std::ios::binary);
  parmatch::write_correspondences(result, outcome.correspondences);
  std::ofstream metrics(
      (std::filesystem::path(config.out_dir) / "metrics.json").string(),
      std::ios::binary);
  metrics << parmatch::metrics_to_json(outcome.metrics);
  std::ofstream trace(
      (std::filesystem::path(config.out_dir) / "trace.log").string(),
      std::ios::binary);
  for (const auto& line : outcome.trace) trace << line << '\n';

  std::cout << "tasks: " << outcome.metrics.task_count
            << "  correspondences: " << outcome.metrics.correspondence_count
            << "  fetches: " << outcome.metrics.fetches << "\n";
  if (!outcome.ok) {
    std::cerr << "run failed: " << outcome.error << "\n";
    return kExitRunFailed;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parallel entity-matching engine"};
  app.require_subcommand(1);

  CommonRunOptions run_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "execute a match workflow");
  add_run_options(run_cmd, run_opts);

  CommonRunOptions serve_opts;
  std::uint16_t listen_port = 7401;
  std::uint16_t data_port = 7402;
  CLI::App* serve_cmd = app.add_subcommand(
      "serve", "run the coordinator and data service for remote workers");
  add_run_options(serve_cmd, serve_opts);
  serve_cmd->add_option("--listen", listen_port, "coordinator port");
  serve_cmd->add_option("--data-listen", data_port, "data service port");

  std::string worker_id = "w1";
  std::string coordinator_addr = "127.0.0.1:7401";
  std::string data_addr = "127.0.0.1:7402";
  std::uint32_t worker_threads = 1;
  std::uint32_t worker_cache = 0;
  CLI::App* worker_cmd =
      app.add_subcommand("worker", "run a match service (remote worker)");
  worker_cmd->add_option("--id", worker_id, "worker id");
  worker_cmd->add_option("--coordinator", coordinator_addr, "host:port");
  worker_cmd->add_option("--data", data_addr, "host:port");
  worker_cmd->add_option("--threads", worker_threads, "executor threads");
  worker_cmd->add_option("--cache", worker_cache, "cached partitions (c)");

  std::uint64_t gen_n = 1000;
  std::string gen_sizes;
  std::uint32_t gen_keys = 20;
  double gen_skew = 1.0;
  double gen_miss = 0.1;
  double gen_dup = 0.2;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "entities.csv";
  std::string gen_source = "src";
  std::string gen_prefix = "e";
  CLI::App* gen_cmd =
      app.add_subcommand("generate", "write a synthetic entity dataset");
  gen_cmd->add_option("--n", gen_n, "entity count");
  gen_cmd->add_option("--sizes", gen_sizes,
                      "explicit block sizes, e.g. 1300,650,450 (rest: misc)");
  gen_cmd->add_option("--keys", gen_keys, "distinct blocking keys");
  gen_cmd->add_option("--skew", gen_skew, "Zipf-like block size skew");
  gen_cmd->add_option("--miss-rate", gen_miss, "fraction without blocking key");
  gen_cmd->add_option("--dup-rate", gen_dup, "fraction of near-duplicates");
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--out", gen_out, "output CSV path");
  gen_cmd->add_option("--source", gen_source, "source label");
  gen_cmd->add_option("--id-prefix", gen_prefix, "entity id prefix");

  CommonRunOptions speedup_opts;
  std::string threads_list = "1,2,4";
  CLI::App* speedup_cmd = app.add_subcommand(
      "speedup", "run the identical plan at several thread counts");
  add_run_options(speedup_cmd, speedup_opts);
  speedup_cmd->add_option("--threads-list", threads_list,
                          "comma-separated thread counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return do_run(run_opts);
    if (serve_cmd->parsed()) return do_serve(serve_opts, listen_port, data_port);
    if (worker_cmd->parsed()) {
      auto split = [](const std::string& addr) {
        auto colon = addr.rfind(':');
        if (colon == std::string::npos) {
          throw parmatch::ConfigError("address must be host:port: " + addr);
        }
        return std::pair<std::string, std::uint16_t>(
            addr.substr(0, colon),
            static_cast<std::uint16_t>(std::stoi(addr.substr(colon + 1))));
      };
      auto [chost, cport] = split(coordinator_addr);
      auto [dhost, dport] = split(data_addr);
      return parmatch::run_remote_worker(
          {worker_id, worker_threads, worker_cache}, chost, cport, dhost,
          dport);
    }
    if (gen_cmd->parsed()) {
      parmatch::SyntheticSpec spec;
      spec.count = gen_n;
      if (!gen_sizes.empty()) {
        std::size_t pos = 0;
        while (pos < gen_sizes.size()) {
          auto comma = gen_sizes.find(',', pos);
          if (comma == std::string::npos) comma = gen_sizes.size();
          spec.explicit_sizes.push_back(
              std::stoull(gen_sizes.substr(pos, comma - pos)));
          pos = comma + 1;
        }
      }
      spec.key_count = gen_keys;
      spec.zipf_skew = gen_skew;
      spec.miss_rate = gen_miss;
      spec.duplicate_rate = gen_dup;
      spec.seed = gen_seed;
      spec.source_id = gen_source;
      spec.id_prefix = gen_prefix;
      auto entities = parmatch::generate_entities(spec);
      std::ofstream out(gen_out, std::ios::binary);
      if (!out) {
        throw parmatch::ConfigError("cannot write output file '" + gen_out +
                                    "'");
      }
      parmatch::write_entities_csv(out, entities);
      std::cout << "wrote " << entities.size() << " entities to " << gen_out
                << "\n";
      return kExitOk;
    }
    if (speedup_cmd->parsed()) {
      parmatch::RunConfig config = make_config(speedup_opts);
      std::vector<std::uint32_t> counts;
      std::size_t pos = 0;
      while (pos < threads_list.size()) {
        auto comma = threads_list.find(',', pos);
        if (comma == std::string::npos) comma = threads_list.size();
        counts.push_back(static_cast<std::uint32_t>(
            std::stoul(threads_list.substr(pos, comma - pos))));
        pos = comma + 1;
      }
      auto rows = parmatch::speedup_experiment(config, counts, std::cout);
      (void)rows;
      return kExitOk;
    }
  } catch (const parmatch::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const parmatch::LoadError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
