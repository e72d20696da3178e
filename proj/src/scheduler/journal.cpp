#include "vc/scheduler/journal.hpp"

#include <stdexcept>
#include <string>

namespace vc::sched {

FileJournal::FileJournal(std::filesystem::path path) : path_(std::move(path)) {
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw std::runtime_error("cannot open journal: " + path_.string());
}

void FileJournal::append(const Json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
}

void FileJournal::flush() { out_.flush(); }

std::vector<Json> read_journal(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read journal: " + path.string());
  std::vector<Json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    // A torn final line (crash mid-write) is dropped; anything else is corruption.
    if (j.is_discarded()) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw std::runtime_error("corrupt journal record in " + path.string());
    }
    records.push_back(std::move(j));
  }
  return records;
}

}  // namespace vc::sched
