#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vc/util/json.hpp"
#include "vc/util/time.hpp"

namespace vc::protocol {

struct TicketId {
  std::uint64_t value = 0;
  auto operator<=>(const TicketId&) const = default;
};

// A named, versioned task definition.
struct TaskDescriptor {
  std::string task_id;
  std::string version;  // content hash over the definition
  std::vector<std::string> resource_deps;
  std::size_t chunking = 1;  // inputs per ticket

  bool operator==(const TaskDescriptor&) const = default;
};

// Builds a descriptor whose version hashes the task id, its code revision
// and its resource dependencies. Chunking is a dispatch parameter and does
// not change the definition.
TaskDescriptor make_descriptor(std::string task_id, std::string_view code_revision,
                               std::vector<std::string> resource_deps, std::size_t chunking = 1);

// Throws std::invalid_argument when an invariant does not hold.
void validate(const TaskDescriptor& descriptor);

enum class TicketStatus { pending, distributed, completed, failed };

std::string_view to_string(TicketStatus status);
TicketStatus ticket_status_from_string(std::string_view text);

struct Distribution {
  std::string worker_id;
  TimestampMs at = 0;
  bool operator==(const Distribution&) const = default;
};

struct ErrorReport {
  TicketId ticket_id;
  std::string worker_id;
  std::string message;
  std::string trace;
  TimestampMs at = 0;
  bool operator==(const ErrorReport&) const = default;
};

struct Ticket {
  TicketId ticket_id;
  std::string project_id;
  std::string task_id;
  std::size_t input_index = 0;
  Json args;
  TimestampMs created_at = 0;
  std::vector<Distribution> distributions;
  TicketStatus status = TicketStatus::pending;
  std::optional<Json> result;
  std::vector<ErrorReport> error_reports;

  bool operator==(const Ticket&) const = default;

  std::optional<TimestampMs> last_distribution() const {
    if (distributions.empty()) return std::nullopt;
    return distributions.back().at;
  }
};

Json to_json(const TaskDescriptor& d);
TaskDescriptor task_descriptor_from_json(const Json& j);
Json to_json(const ErrorReport& r);
ErrorReport error_report_from_json(const Json& j);
Json to_json(const Ticket& t);
Ticket ticket_from_json(const Json& j);

}  // namespace vc::protocol

template <>
struct std::hash<vc::protocol::TicketId> {
  std::size_t operator()(const vc::protocol::TicketId& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
