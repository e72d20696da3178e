#include "vc/worker/lru_cache.hpp"

#include "vc/util/hash.hpp"

namespace vc::worker {

std::size_t LruCache::size_bytes() const {
  std::lock_guard lock(mutex_);
  return used_;
}

std::size_t LruCache::entry_count() const {
  std::lock_guard lock(mutex_);
  return index_.size();
}

std::size_t LruCache::evictions() const {
  std::lock_guard lock(mutex_);
  return evictions_;
}

bool LruCache::contains(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return index_.count(name) > 0;
}

std::shared_ptr<const std::string> LruCache::get(const std::string& name) {
  std::lock_guard lock(mutex_);
  auto it = index_.find(name);
  if (it == index_.end()) return nullptr;
  order_.splice(order_.begin(), order_, it->second);
  return it->second->bytes;
}

std::optional<std::string> LruCache::hash_of(const std::string& name) const {
  std::lock_guard lock(mutex_);
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second->hash;
}

void LruCache::evict_until_fits(std::size_t incoming) {
  while (!order_.empty() && used_ + incoming > capacity_) {
    used_ -= order_.back().bytes->size();
    index_.erase(order_.back().name);
    order_.pop_back();
    ++evictions_;
  }
}

void LruCache::put(const std::string& name, std::shared_ptr<const std::string> bytes, std::string hash) {
  std::lock_guard lock(mutex_);
  if (auto it = index_.find(name); it != index_.end()) {
    used_ -= it->second->bytes->size();
    order_.erase(it->second);
    index_.erase(it);
  }
  if (bytes->size() > capacity_) return;
  evict_until_fits(bytes->size());
  used_ += bytes->size();
  order_.push_front(Entry{name, std::move(bytes), std::move(hash)});
  index_[name] = order_.begin();
}

void LruCache::clear() {
  std::lock_guard lock(mutex_);
  order_.clear();
  index_.clear();
  used_ = 0;
}

std::shared_ptr<const std::string> LruCache::get_or_fetch(const std::string& name, const std::string& expected_hash,
                                                          const Fetcher& fetch) {
  {
    std::lock_guard lock(mutex_);
    auto it = index_.find(name);
    if (it != index_.end() && (expected_hash.empty() || it->second->hash == expected_hash)) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->bytes;
    }
  }
  for (int attempt = 0; attempt < 2; ++attempt) {
    FetchResult r = fetch(name);
    if (!r.bytes) throw CacheError("fetch of '" + name + "' returned no data");
    const std::string actual = sha256_hex(*r.bytes);
    const std::string& want = expected_hash.empty() ? r.advertised_hash : expected_hash;
    if (want.empty() || actual == want) {
      put(name, r.bytes, actual);
      return r.bytes;
    }
  }
  throw CacheError("hash mismatch for resource '" + name + "' after refetch");
}

}  // namespace vc::worker
