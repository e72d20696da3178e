#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vc::coord {

// Thrown for names that could escape the resource root.
class ResourceAccessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Resource {
  std::shared_ptr<const std::string> bytes;
  std::string hash;  // sha256 hex of bytes
};

// Files under a root directory plus named in-memory blobs, each served with
// its content hash. In-memory entries shadow files of the same name.
class ResourceStore {
 public:
  explicit ResourceStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  // Relative, '/'-separated, no empty, "." or ".." segments.
  static bool valid_name(std::string_view name);

  // nullopt when the resource does not exist; throws ResourceAccessError
  // for invalid names.
  std::optional<Resource> get(const std::string& name) const;
  std::optional<std::string> hash(const std::string& name) const;

  void put(const std::string& name, std::string bytes);
  bool remove(const std::string& name);

 private:
  struct FileEntry {
    std::uintmax_t size = 0;
    std::filesystem::file_time_type mtime;
    bool stable = false;
    Resource resource;
  };

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, Resource> memory_;
  mutable std::map<std::string, FileEntry> files_;
};

}  // namespace vc::coord
