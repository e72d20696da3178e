#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "vc/protocol/message.hpp"
#include "vc/protocol/types.hpp"
#include "vc/scheduler/config.hpp"
#include "vc/scheduler/journal.hpp"

namespace vc::sched {

using protocol::ErrorReport;
using protocol::SubmitOutcome;
using protocol::TaskDescriptor;
using protocol::Ticket;
using protocol::TicketId;
using protocol::TicketStatus;

class SchedulerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClientInfo {
  std::string worker_id;
  std::string user_agent;
  TimestampMs connected_at = 0;
  bool operator==(const ClientInfo&) const = default;
};

struct ProjectCounters {
  std::size_t tasks = 0;     // enqueue calls
  std::size_t pending = 0;   // tickets not yet completed (and not failed)
  std::size_t executed = 0;  // completed tickets
  std::size_t errors = 0;    // error reports received
  std::size_t failed = 0;    // tickets that hit max_errors
  bool operator==(const ProjectCounters&) const = default;
};

struct ProjectStats {
  std::string name;
  ProjectCounters counters;
  std::vector<ClientInfo> clients;
};

// Sort key of a ticket: creation time until first handed out, then the last
// distribution time plus the redistribution timeout. A ticket put back by an
// error report sorts by its creation time again.
TimestampMs virtual_created_time(const Ticket& ticket, const SchedulerConfig& cfg);

// Owns all ticket state. Not thread-safe: one logical owner serializes calls
// (see SchedulerService).
class Scheduler {
 public:
  explicit Scheduler(SchedulerConfig cfg, std::unique_ptr<Journal> journal = nullptr);

  // Opens the configured persistence path, replaying an existing journal
  // before appending to it.
  static Scheduler open(SchedulerConfig cfg);

  // Rebuilds state from journal records; the result has no journal attached.
  static Scheduler replay(SchedulerConfig cfg, std::span<const Json> records);

  const SchedulerConfig& config() const { return cfg_; }

  void register_project(const std::string& project_id);
  bool has_project(const std::string& project_id) const;

  // Splits `inputs` into ceil(n / chunking) tickets. With chunking 1 a
  // ticket's args are the input itself, otherwise a JSON array of the chunk.
  std::vector<TicketId> enqueue(const std::string& project_id, const TaskDescriptor& task,
                                std::span<const Json> inputs, TimestampMs now);

  std::optional<Ticket> next_ticket(TimestampMs now, const std::string& worker_id);
  SubmitOutcome submit_result(TicketId id, const std::string& worker_id, Json result, TimestampMs now);
  void record_error(ErrorReport report);

  ProjectStats project_stats(const std::string& project_id) const;
  std::vector<std::string> project_ids() const;

  void client_connected(ClientInfo client);
  void client_disconnected(const std::string& worker_id);
  std::vector<ClientInfo> clients() const;

  const Ticket* find(TicketId id) const;
  const std::optional<TaskDescriptor> descriptor(const std::string& task_id) const;
  const std::map<TicketId, Ticket>& tickets() const { return tickets_; }

  // Counters recomputed from scratch over the ticket table.
  ProjectCounters recount(const std::string& project_id) const;

  void flush_journal();
  bool operator==(const Scheduler& other) const;

 private:
  using ReadyKey = std::tuple<TimestampMs, TimestampMs, TicketId>;  // (vct, created_at, id)
  using ResendKey = std::tuple<TimestampMs, TimestampMs, TicketId>;  // (last distribution, created_at, id)

  void apply(const Json& record);
  void log(Json record);
  void index(const Ticket& t);
  void unindex(const Ticket& t);
  Ticket& hand_out(Ticket& t, const std::string& worker_id, TimestampMs now);

  SchedulerConfig cfg_;
  std::unique_ptr<Journal> journal_;
  std::map<TicketId, Ticket> tickets_;
  std::map<std::string, ProjectCounters> projects_;
  std::map<std::string, TaskDescriptor> tasks_;
  std::map<std::string, ClientInfo> clients_;
  std::map<std::string, std::set<std::string>> project_tasks_;
  std::set<ReadyKey> ready_;
  std::set<ResendKey> resend_;
  std::uint64_t next_id_ = 1;
};

}  // namespace vc::sched
