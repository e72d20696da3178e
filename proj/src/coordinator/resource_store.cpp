#include "vc/coordinator/resource_store.hpp"

#include <fstream>
#include <sstream>

#include "vc/util/hash.hpp"

namespace vc::coord {

namespace fs = std::filesystem;

ResourceStore::ResourceStore(fs::path root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw std::runtime_error("resource root '" + root.string() + "' is not a directory");
  root_ = fs::canonical(root);
  fs::directory_iterator it(root_, ec);
  if (ec) throw std::runtime_error("resource root '" + root_.string() + "' is not readable: " + ec.message());
}

bool ResourceStore::valid_name(std::string_view name) {
  if (name.empty() || name.size() > 512 || name.front() == '/') return false;
  std::size_t start = 0;
  while (start <= name.size()) {
    const auto end = std::min(name.find('/', start), name.size());
    const auto seg = name.substr(start, end - start);
    if (seg.empty() || seg == "." || seg == "..") return false;
    for (char c : seg) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                      c == '-' || c == '_';
      if (!ok) return false;
    }
    start = end + 1;
  }
  return true;
}

std::optional<Resource> ResourceStore::get(const std::string& name) const {
  if (!valid_name(name)) throw ResourceAccessError("invalid resource name '" + name + "'");
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(name); it != memory_.end()) return it->second;

  const fs::path path = root_ / name;
  std::error_code ec;
  const fs::path resolved = fs::weakly_canonical(path, ec);
  if (ec) return std::nullopt;
  const auto rel = resolved.lexically_relative(root_);
  if (rel.empty() || *rel.begin() == "..") throw ResourceAccessError("resource '" + name + "' resolves outside the root");
  if (!fs::is_regular_file(resolved, ec)) {
    files_.erase(name);
    return std::nullopt;
  }
  const auto size = fs::file_size(resolved, ec);
  const auto mtime = fs::last_write_time(resolved, ec);
  if (ec) return std::nullopt;
  if (auto it = files_.find(name); it != files_.end() && it->second.stable && it->second.size == size &&
                                       it->second.mtime == mtime)
    return it->second.resource;

  std::ifstream in(resolved, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  auto bytes = std::make_shared<const std::string>(buf.str());
  Resource r{bytes, sha256_hex(*bytes)};
  // recently modified files are re-read on every request
  const bool stable = fs::file_time_type::clock::now() - mtime > std::chrono::seconds(2);
  files_[name] = FileEntry{size, mtime, stable, r};
  return r;
}

std::optional<std::string> ResourceStore::hash(const std::string& name) const {
  auto r = get(name);
  if (!r) return std::nullopt;
  return r->hash;
}

void ResourceStore::put(const std::string& name, std::string bytes) {
  if (!valid_name(name)) throw ResourceAccessError("invalid resource name '" + name + "'");
  auto shared = std::make_shared<const std::string>(std::move(bytes));
  Resource r{shared, sha256_hex(*shared)};
  std::lock_guard lock(mutex_);
  memory_[name] = std::move(r);
}

bool ResourceStore::remove(const std::string& name) {
  std::lock_guard lock(mutex_);
  return memory_.erase(name) > 0;
}

}  // namespace vc::coord
