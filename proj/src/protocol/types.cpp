#include "vc/protocol/types.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "vc/util/hash.hpp"

namespace vc::protocol {

TaskDescriptor make_descriptor(std::string task_id, std::string_view code_revision,
                               std::vector<std::string> resource_deps, std::size_t chunking) {
  std::string definition = task_id;
  definition += '\n';
  definition += code_revision;
  for (const auto& dep : resource_deps) {
    definition += '\n';
    definition += dep;
  }
  TaskDescriptor d{std::move(task_id), sha256_hex(definition), std::move(resource_deps), chunking};
  validate(d);
  return d;
}

void validate(const TaskDescriptor& d) {
  if (d.task_id.empty()) throw std::invalid_argument("task_id must be nonempty");
  if (d.chunking == 0) throw std::invalid_argument("chunking must be positive");
  std::set<std::string> seen;
  for (const auto& dep : d.resource_deps)
    if (!seen.insert(dep).second) throw std::invalid_argument("duplicate resource dependency: " + dep);
}

std::string_view to_string(TicketStatus status) {
  switch (status) {
    case TicketStatus::pending: return "pending";
    case TicketStatus::distributed: return "distributed";
    case TicketStatus::completed: return "completed";
    case TicketStatus::failed: return "failed";
  }
  return "pending";
}

TicketStatus ticket_status_from_string(std::string_view text) {
  if (text == "pending") return TicketStatus::pending;
  if (text == "distributed") return TicketStatus::distributed;
  if (text == "completed") return TicketStatus::completed;
  if (text == "failed") return TicketStatus::failed;
  throw std::invalid_argument("unknown ticket status: " + std::string(text));
}

Json to_json(const TaskDescriptor& d) {
  Json j;
  j["task_id"] = d.task_id;
  j["version"] = d.version;
  j["resource_deps"] = d.resource_deps;
  j["chunking"] = d.chunking;
  return j;
}

TaskDescriptor task_descriptor_from_json(const Json& j) {
  TaskDescriptor d;
  d.task_id = j.at("task_id").get<std::string>();
  d.version = j.at("version").get<std::string>();
  d.resource_deps = j.at("resource_deps").get<std::vector<std::string>>();
  d.chunking = j.at("chunking").get<std::size_t>();
  return d;
}

Json to_json(const ErrorReport& r) {
  Json j;
  j["ticket_id"] = r.ticket_id.value;
  j["worker_id"] = r.worker_id;
  j["message"] = r.message;
  j["trace"] = r.trace;
  j["at"] = r.at;
  return j;
}

ErrorReport error_report_from_json(const Json& j) {
  ErrorReport r;
  r.ticket_id = TicketId{j.at("ticket_id").get<std::uint64_t>()};
  r.worker_id = j.at("worker_id").get<std::string>();
  r.message = j.at("message").get<std::string>();
  r.trace = j.at("trace").get<std::string>();
  r.at = j.at("at").get<TimestampMs>();
  return r;
}

Json to_json(const Ticket& t) {
  Json j;
  j["ticket_id"] = t.ticket_id.value;
  j["project_id"] = t.project_id;
  j["task_id"] = t.task_id;
  j["input_index"] = t.input_index;
  j["args"] = t.args;
  j["created_at"] = t.created_at;
  Json dists = Json::array();
  for (const auto& d : t.distributions) dists.push_back(Json{{"worker_id", d.worker_id}, {"at", d.at}});
  j["distributions"] = std::move(dists);
  j["status"] = to_string(t.status);
  if (t.result) j["result"] = *t.result;
  Json errors = Json::array();
  for (const auto& e : t.error_reports) errors.push_back(to_json(e));
  j["error_reports"] = std::move(errors);
  return j;
}

Ticket ticket_from_json(const Json& j) {
  Ticket t;
  t.ticket_id = TicketId{j.at("ticket_id").get<std::uint64_t>()};
  t.project_id = j.at("project_id").get<std::string>();
  t.task_id = j.at("task_id").get<std::string>();
  t.input_index = j.at("input_index").get<std::size_t>();
  t.args = j.at("args");
  t.created_at = j.at("created_at").get<TimestampMs>();
  for (const auto& d : j.at("distributions"))
    t.distributions.push_back({d.at("worker_id").get<std::string>(), d.at("at").get<TimestampMs>()});
  t.status = ticket_status_from_string(j.at("status").get<std::string>());
  if (j.contains("result")) t.result = j.at("result");
  for (const auto& e : j.at("error_reports")) t.error_reports.push_back(error_report_from_json(e));
  return t;
}

}  // namespace vc::protocol
