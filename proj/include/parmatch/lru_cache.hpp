#pragma once

#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "parmatch/data_service.hpp"

namespace parmatch {

// Per-worker partition cache with LRU replacement: when a newly fetched
// partition is stored into a full cache it replaces the entry with the
// oldest access time. Capacity 0 disables caching. Shared by all threads
// of a worker; mutations are serialized internally.
class PartitionCache {
 public:
  explicit PartitionCache(std::size_t capacity) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }

  // Hit refreshes the entry's access recency.
  PayloadPtr get(const std::string& partition_id) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(partition_id);
    if (it == index_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->payload;
  }

  // Inserts (or refreshes) an entry; returns the evicted partition id when
  // an eviction happened.
  std::optional<std::string> put(const std::string& partition_id,
                                 PayloadPtr payload) {
    std::lock_guard lock(mutex_);
    if (capacity_ == 0) return std::nullopt;
    auto it = index_.find(partition_id);
    if (it != index_.end()) {
      it->second->payload = std::move(payload);
      order_.splice(order_.begin(), order_, it->second);
      return std::nullopt;
    }
    std::optional<std::string> evicted;
    if (order_.size() == capacity_) {
      evicted = order_.back().partition_id;
      index_.erase(*evicted);
      order_.pop_back();
    }
    order_.push_front(Entry{partition_id, std::move(payload)});
    index_[partition_id] = order_.begin();
    return evicted;
  }

  // Resident ids in recency order, most recent first. Used as the cache
  // snapshot piggybacked on completion messages.
  std::vector<std::string> resident_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    ids.reserve(order_.size());
    for (const auto& entry : order_) ids.push_back(entry.partition_id);
    return ids;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return order_.size();
  }

 private:
  struct Entry {
    std::string partition_id;
    PayloadPtr payload;
  };

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<Entry> order_;  // front = most recently used
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

}  // namespace parmatch
