#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <vector>

#include "vc/util/json.hpp"

namespace vc::sched {

// Sink for one JSON record per scheduler state transition.
class Journal {
 public:
  virtual ~Journal() = default;
  virtual void append(const Json& record) = 0;
  virtual void flush() {}
};

class MemoryJournal final : public Journal {
 public:
  void append(const Json& record) override { records_.push_back(record); }
  const std::vector<Json>& records() const { return records_; }

 private:
  std::vector<Json> records_;
};

// Append-only JSON-lines file.
class FileJournal final : public Journal {
 public:
  explicit FileJournal(std::filesystem::path path);
  void append(const Json& record) override;
  void flush() override;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

std::vector<Json> read_journal(const std::filesystem::path& path);

}  // namespace vc::sched
