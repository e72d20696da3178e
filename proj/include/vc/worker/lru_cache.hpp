#pragma once

#include <cstddef>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace vc::worker {

class CacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FetchResult {
  std::shared_ptr<const std::string> bytes;
  std::string advertised_hash;  // hash reported by the server, may be empty
};

using Fetcher = std::function<FetchResult(const std::string& name)>;

// Byte-bounded cache of named blobs, evicting least recently used first.
class LruCache {
 public:
  explicit LruCache(std::size_t capacity_bytes) : capacity_(capacity_bytes) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size_bytes() const;
  std::size_t entry_count() const;
  std::size_t evictions() const;
  bool contains(const std::string& name) const;

  // A hit marks the entry most recently used.
  std::shared_ptr<const std::string> get(const std::string& name);
  std::optional<std::string> hash_of(const std::string& name) const;

  // Inserts or replaces, evicting until the total fits. Blobs larger than
  // the capacity are not retained.
  void put(const std::string& name, std::shared_ptr<const std::string> bytes, std::string hash);
  void clear();

  // Returns the cached blob when its hash matches `expected_hash` (any hash
  // when empty); otherwise fetches, verifies against the expected or
  // advertised hash, refetches once on mismatch and inserts.
  std::shared_ptr<const std::string> get_or_fetch(const std::string& name, const std::string& expected_hash,
                                                  const Fetcher& fetch);

 private:
  struct Entry {
    std::string name;
    std::shared_ptr<const std::string> bytes;
    std::string hash;
  };
  using List = std::list<Entry>;

  void evict_until_fits(std::size_t incoming);

  std::size_t capacity_;
  std::size_t used_ = 0;
  std::size_t evictions_ = 0;
  mutable std::mutex mutex_;
  List order_;  // front = most recent
  std::unordered_map<std::string, List::iterator> index_;
};

}  // namespace vc::worker
