#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "parmatch/model.hpp"
#include "parmatch/partitioning.hpp"

namespace parmatch {

// Materialized entity list served to workers; immutable once registered.
struct PartitionPayload {
  std::string partition_id;
  std::vector<Entity> entities;
};

using PayloadPtr = std::shared_ptr<const PartitionPayload>;

struct CsvSchema {
  std::string id_column = "id";
  char delimiter = ',';
};

struct LoadReport {
  std::uint64_t count = 0;
  std::vector<std::string> columns;
};

// Central store for entities, partition payloads and match results. Every
// partition fetch is counted so cache effectiveness stays measurable.
// Mutations are serialized; fetches are concurrency-safe.
class DataStore {
 public:
  // Loads delimited text with a header row. Empty fields load as absent
  // attribute values. Throws LoadError naming the line on bad input.
  LoadReport load_entities_csv(std::istream& in, const CsvSchema& schema,
                               const std::string& source_id);

  void add_entity(Entity entity);  // throws LoadError on duplicate key

  std::uint64_t entity_count() const;
  // Entities in load order; spans remain valid while the store lives.
  const std::vector<Entity>& entities() const { return entities_; }
  std::vector<Entity> entities_of_source(const std::string& source_id) const;
  const Entity& entity(const EntityKey& key) const;  // throws NotFoundError
  std::set<std::string> attribute_names() const;
  // Attribute columns seen by loads plus attributes of directly added
  // entities; the authority for schema checks (a column whose values are
  // all empty still exists).
  std::set<std::string> schema_columns() const;

  // Materializes payloads for every partition and registers the task ids.
  void register_plan(const PartitionPlan& plan);
  void clear_results();  // keeps entities and partitions

  PayloadPtr fetch_partition(const std::string& partition_id);
  std::uint64_t fetch_count(const std::string& partition_id) const;
  std::uint64_t total_fetches() const;

  // Idempotent under byte-identical re-delivery; conflicting repeats for
  // the same task raise IntegrityError, unknown task ids NotFoundError.
  void store_result(const MatchResult& result);
  bool has_result(const std::string& task_id) const;
  std::vector<MatchResult> results() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entity> entities_;
  std::map<EntityKey, std::size_t> entity_index_;
  std::set<std::string> schema_columns_;
  std::unordered_map<std::string, PayloadPtr> partitions_;
  std::unordered_map<std::string, std::uint64_t> fetch_counts_;
  std::uint64_t total_fetches_ = 0;
  std::set<std::string> known_tasks_;
  std::map<std::string, MatchResult> results_;
};

// Partition access used by workers. In-process workers read the store
// directly; remote workers go through the socket data service.
class DataClient {
 public:
  virtual ~DataClient() = default;
  virtual PayloadPtr fetch(const std::string& partition_id) = 0;
};

class LocalDataClient : public DataClient {
 public:
  explicit LocalDataClient(std::shared_ptr<DataStore> store)
      : store_(std::move(store)) {}
  PayloadPtr fetch(const std::string& partition_id) override {
    return store_->fetch_partition(partition_id);
  }

 private:
  std::shared_ptr<DataStore> store_;
};

}  // namespace parmatch
