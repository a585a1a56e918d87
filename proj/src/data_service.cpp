#include "parmatch/data_service.hpp"

#include <algorithm>

#include "parmatch/csv.hpp"
#include "parmatch/error.hpp"

namespace parmatch {

LoadReport DataStore::load_entities_csv(std::istream& in,
                                        const CsvSchema& schema,
                                        const std::string& source_id) {
  auto records = read_csv(in, schema.delimiter);
  if (records.empty()) throw LoadError("input has no header row");

  const auto& header = records.front().fields;
  std::size_t id_index = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == schema.id_column) {
      id_index = i;
      break;
    }
  }
  if (id_index == header.size()) {
    throw LoadError("missing id column '" + schema.id_column + "'");
  }

  LoadReport report;
  report.columns = header;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != id_index) schema_columns_.insert(header[c]);
    }
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& record = records[r];
    if (record.fields.size() != header.size()) {
      throw LoadError("line " + std::to_string(record.line) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(record.fields.size()));
    }
    Entity entity;
    entity.source_id = source_id;
    entity.id = record.fields[id_index];
    if (entity.id.empty()) {
      throw LoadError("line " + std::to_string(record.line) + ": empty id");
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == id_index) continue;
      if (record.fields[c].empty()) continue;  // empty field = absent value
      entity.attributes.emplace(header[c], record.fields[c]);
    }
    try {
      add_entity(std::move(entity));
    } catch (const LoadError&) {
      throw LoadError("line " + std::to_string(record.line) +
                      ": duplicate id '" + record.fields[id_index] + "'");
    }
    ++report.count;
  }
  return report;
}

void DataStore::add_entity(Entity entity) {
  std::lock_guard lock(mutex_);
  EntityKey key = key_of(entity);
  if (entity_index_.contains(key)) {
    throw LoadError("duplicate entity id '" + key.id + "' in source '" +
                    key.source_id + "'");
  }
  for (const auto& [name, value] : entity.attributes) {
    schema_columns_.insert(name);
  }
  entity_index_.emplace(std::move(key), entities_.size());
  entities_.push_back(std::move(entity));
}

std::uint64_t DataStore::entity_count() const {
  std::lock_guard lock(mutex_);
  return entities_.size();
}

std::vector<Entity> DataStore::entities_of_source(
    const std::string& source_id) const {
  std::lock_guard lock(mutex_);
  std::vector<Entity> out;
  for (const auto& e : entities_) {
    if (e.source_id == source_id) out.push_back(e);
  }
  return out;
}

const Entity& DataStore::entity(const EntityKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = entity_index_.find(key);
  if (it == entity_index_.end()) {
    throw NotFoundError("unknown entity " + key.source_id + ":" + key.id);
  }
  return entities_[it->second];
}

std::set<std::string> DataStore::attribute_names() const {
  std::lock_guard lock(mutex_);
  std::set<std::string> names;
  for (const auto& e : entities_) {
    for (const auto& [name, value] : e.attributes) names.insert(name);
  }
  return names;
}

std::set<std::string> DataStore::schema_columns() const {
  std::lock_guard lock(mutex_);
  return schema_columns_;
}

void DataStore::register_plan(const PartitionPlan& plan) {
  std::lock_guard lock(mutex_);
  for (const auto& partition : plan.partitions) {
    auto payload = std::make_shared<PartitionPayload>();
    payload->partition_id = partition.id;
    payload->entities.reserve(partition.entities.size());
    for (const auto& key : partition.entities) {
      auto it = entity_index_.find(key);
      if (it == entity_index_.end()) {
        throw IntegrityError("partition " + partition.id +
                             " references unknown entity " + key.id);
      }
      payload->entities.push_back(entities_[it->second]);
    }
    partitions_[partition.id] = std::move(payload);
  }
  for (const auto& task : plan.tasks) known_tasks_.insert(task.id);
}

void DataStore::clear_results() {
  std::lock_guard lock(mutex_);
  results_.clear();
}

PayloadPtr DataStore::fetch_partition(const std::string& partition_id) {
  std::lock_guard lock(mutex_);
  auto it = partitions_.find(partition_id);
  if (it == partitions_.end()) {
    throw NotFoundError("unknown partition " + partition_id);
  }
  ++fetch_counts_[partition_id];
  ++total_fetches_;
  return it->second;
}

std::uint64_t DataStore::fetch_count(const std::string& partition_id) const {
  std::lock_guard lock(mutex_);
  auto it = fetch_counts_.find(partition_id);
  return it == fetch_counts_.end() ? 0 : it->second;
}

std::uint64_t DataStore::total_fetches() const {
  std::lock_guard lock(mutex_);
  return total_fetches_;
}

void DataStore::store_result(const MatchResult& result) {
  std::lock_guard lock(mutex_);
  if (!known_tasks_.contains(result.task_id)) {
    throw NotFoundError("unknown task " + result.task_id);
  }
  auto it = results_.find(result.task_id);
  if (it == results_.end()) {
    results_.emplace(result.task_id, result);
    return;
  }
  if (!same_result(it->second, result)) {
    throw IntegrityError("conflicting duplicate result for task " +
                         result.task_id);
  }
  // Identical repeat after reassignment: keep the first copy.
}

bool DataStore::has_result(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  return results_.contains(task_id);
}

std::vector<MatchResult> DataStore::results() const {
  std::lock_guard lock(mutex_);
  std::vector<MatchResult> out;
  out.reserve(results_.size());
  for (const auto& [task_id, result] : results_) out.push_back(result);
  return out;
}

}  // namespace parmatch
