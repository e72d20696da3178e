#include "vc/scheduler/scheduler.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

namespace vc::sched {

void SchedulerConfig::validate() const {
  if (redistribution_timeout <= 0) throw SchedulerError("redistribution_timeout must be positive");
  if (min_redistribution_interval <= 0) throw SchedulerError("min_redistribution_interval must be positive");
  if (max_errors && *max_errors == 0) throw SchedulerError("max_errors must be positive when set");
}

TimestampMs virtual_created_time(const Ticket& ticket, const SchedulerConfig& cfg) {
  if (ticket.status == TicketStatus::pending || ticket.distributions.empty()) return ticket.created_at;
  return ticket.distributions.back().at + cfg.redistribution_timeout;
}

Scheduler::Scheduler(SchedulerConfig cfg, std::unique_ptr<Journal> journal)
    : cfg_(std::move(cfg)), journal_(std::move(journal)) {
  cfg_.validate();
}

Scheduler Scheduler::open(SchedulerConfig cfg) {
  if (!cfg.persistence_path) return Scheduler(std::move(cfg));
  const auto path = *cfg.persistence_path;
  std::vector<Json> records;
  if (std::filesystem::exists(path)) records = read_journal(path);
  Scheduler s = replay(cfg, records);
  s.journal_ = std::make_unique<FileJournal>(path);
  return s;
}

Scheduler Scheduler::replay(SchedulerConfig cfg, std::span<const Json> records) {
  Scheduler s(std::move(cfg));
  for (const auto& r : records) s.apply(r);
  return s;
}

void Scheduler::log(Json record) {
  apply(record);
  if (journal_) journal_->append(record);
}

void Scheduler::flush_journal() {
  if (journal_) journal_->flush();
}

void Scheduler::register_project(const std::string& project_id) {
  if (projects_.contains(project_id)) return;
  log(Json{{"op", "project"}, {"project", project_id}});
}

bool Scheduler::has_project(const std::string& project_id) const { return projects_.contains(project_id); }

std::vector<TicketId> Scheduler::enqueue(const std::string& project_id, const TaskDescriptor& task,
                                         std::span<const Json> inputs, TimestampMs now) {
  if (inputs.empty()) throw SchedulerError("enqueue requires at least one input");
  try {
    protocol::validate(task);
  } catch (const std::invalid_argument& e) {
    throw SchedulerError(e.what());
  }
  if (auto it = tasks_.find(task.task_id); it != tasks_.end() && it->second.version != task.version)
    throw SchedulerError("task " + task.task_id + " already registered with version " + it->second.version);
  register_project(project_id);

  Json tickets = Json::array();
  std::vector<TicketId> ids;
  const std::size_t chunk = task.chunking;
  for (std::size_t start = 0, id = next_id_; start < inputs.size(); start += chunk, ++id) {
    Json args;
    if (chunk == 1) {
      args = inputs[start];
    } else {
      args = Json::array();
      for (std::size_t i = start; i < std::min(inputs.size(), start + chunk); ++i) args.push_back(inputs[i]);
    }
    tickets.push_back(Json{{"id", id}, {"input_index", start}, {"args", std::move(args)}});
    ids.push_back(TicketId{id});
  }
  log(Json{{"op", "enqueue"}, {"project", project_id}, {"task", protocol::to_json(task)}, {"at", now},
           {"tickets", std::move(tickets)}});
  return ids;
}

void Scheduler::index(const Ticket& t) {
  if (t.status == TicketStatus::completed || t.status == TicketStatus::failed) return;
  ready_.emplace(virtual_created_time(t, cfg_), t.created_at, t.ticket_id);
  if (t.status == TicketStatus::distributed) resend_.emplace(t.distributions.back().at, t.created_at, t.ticket_id);
}

void Scheduler::unindex(const Ticket& t) {
  ready_.erase({virtual_created_time(t, cfg_), t.created_at, t.ticket_id});
  if (!t.distributions.empty()) resend_.erase({t.distributions.back().at, t.created_at, t.ticket_id});
}

std::optional<Ticket> Scheduler::next_ticket(TimestampMs now, const std::string& worker_id) {
  const DurationMs interval = cfg_.min_redistribution_interval;
  for (const auto& [vct, created, id] : ready_) {
    if (vct > now) break;
    const Ticket& t = tickets_.at(id);
    if (auto last = t.last_distribution(); last && now - *last < interval) continue;
    return hand_out(tickets_.at(id), worker_id, now);
  }
  // Nothing fresh or timed out: re-send the ticket that has waited longest
  // since its last hand-out, once the minimum interval has passed.
  if (!resend_.empty()) {
    const auto& [last, created, id] = *resend_.begin();
    if (now - last >= interval) return hand_out(tickets_.at(id), worker_id, now);
  }
  return std::nullopt;
}

Ticket& Scheduler::hand_out(Ticket& t, const std::string& worker_id, TimestampMs now) {
  log(Json{{"op", "distribute"}, {"ticket", t.ticket_id.value}, {"worker", worker_id}, {"at", now}});
  return t;
}

SubmitOutcome Scheduler::submit_result(TicketId id, const std::string& worker_id, Json result, TimestampMs now) {
  auto it = tickets_.find(id);
  if (it == tickets_.end()) return SubmitOutcome::unknown;
  if (it->second.status == TicketStatus::completed) return SubmitOutcome::duplicate;
  log(Json{{"op", "complete"}, {"ticket", id.value}, {"worker", worker_id}, {"result", std::move(result)}, {"at", now}});
  return SubmitOutcome::accepted;
}

void Scheduler::record_error(ErrorReport report) {
  if (!tickets_.contains(report.ticket_id)) {
    spdlog::warn("error report for unknown ticket {} from {} ignored", report.ticket_id.value, report.worker_id);
    return;
  }
  if (report.message.empty()) report.message = "(no message)";
  log(Json{{"op", "error"}, {"report", protocol::to_json(report)}});
}

void Scheduler::apply(const Json& r) {
  const std::string op = r.at("op").get<std::string>();
  if (op == "project") {
    projects_.try_emplace(r.at("project").get<std::string>());
  } else if (op == "enqueue") {
    const std::string project = r.at("project").get<std::string>();
    const TaskDescriptor task = protocol::task_descriptor_from_json(r.at("task"));
    const TimestampMs at = r.at("at").get<TimestampMs>();
    auto& counters = projects_[project];
    tasks_[task.task_id] = task;
    const bool new_task = project_tasks_[project].insert(task.task_id).second;
    for (const auto& tj : r.at("tickets")) {
      Ticket t;
      t.ticket_id = TicketId{tj.at("id").get<std::uint64_t>()};
      t.project_id = project;
      t.task_id = task.task_id;
      t.input_index = tj.at("input_index").get<std::size_t>();
      t.args = tj.at("args");
      t.created_at = at;
      next_id_ = std::max(next_id_, t.ticket_id.value + 1);
      ++counters.pending;
      index(t);
      tickets_.emplace(t.ticket_id, std::move(t));
    }
    if (new_task) ++counters.tasks;
  } else if (op == "distribute") {
    Ticket& t = tickets_.at(TicketId{r.at("ticket").get<std::uint64_t>()});
    unindex(t);
    t.distributions.push_back({r.at("worker").get<std::string>(), r.at("at").get<TimestampMs>()});
    t.status = TicketStatus::distributed;
    index(t);
  } else if (op == "complete") {
    Ticket& t = tickets_.at(TicketId{r.at("ticket").get<std::uint64_t>()});
    auto& counters = projects_[t.project_id];
    unindex(t);
    if (t.status == TicketStatus::failed) --counters.failed;
    else --counters.pending;
    t.status = TicketStatus::completed;
    t.result = r.at("result");
    ++counters.executed;
  } else if (op == "error") {
    ErrorReport report = protocol::error_report_from_json(r.at("report"));
    Ticket& t = tickets_.at(report.ticket_id);
    auto& counters = projects_[t.project_id];
    ++counters.errors;
    unindex(t);
    t.error_reports.push_back(std::move(report));
    if (t.status != TicketStatus::completed && t.status != TicketStatus::failed) {
      if (cfg_.max_errors && t.error_reports.size() >= *cfg_.max_errors) {
        t.status = TicketStatus::failed;
        --counters.pending;
        ++counters.failed;
      } else {
        t.status = TicketStatus::pending;
      }
    }
    index(t);
  } else if (op == "connect") {
    ClientInfo c{r.at("worker").get<std::string>(), r.at("user_agent").get<std::string>(),
                 r.at("at").get<TimestampMs>()};
    clients_[c.worker_id] = c;
  } else if (op == "disconnect") {
    clients_.erase(r.at("worker").get<std::string>());
  } else {
    throw SchedulerError("unknown journal op: " + op);
  }
}

ProjectStats Scheduler::project_stats(const std::string& project_id) const {
  auto it = projects_.find(project_id);
  if (it == projects_.end()) throw SchedulerError("unknown project: " + project_id);
  return ProjectStats{project_id, it->second, clients()};
}

std::vector<std::string> Scheduler::project_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : projects_) ids.push_back(id);
  return ids;
}

ProjectCounters Scheduler::recount(const std::string& project_id) const {
  ProjectCounters c;
  std::set<std::string> task_ids;
  for (const auto& [_, t] : tickets_) {
    if (t.project_id != project_id) continue;
    task_ids.insert(t.task_id);
    c.errors += t.error_reports.size();
    switch (t.status) {
      case TicketStatus::pending:
      case TicketStatus::distributed: ++c.pending; break;
      case TicketStatus::completed: ++c.executed; break;
      case TicketStatus::failed: ++c.failed; break;
    }
  }
  c.tasks = task_ids.size();
  return c;
}

void Scheduler::client_connected(ClientInfo client) {
  log(Json{{"op", "connect"}, {"worker", client.worker_id}, {"user_agent", client.user_agent},
           {"at", client.connected_at}});
}

void Scheduler::client_disconnected(const std::string& worker_id) {
  if (!clients_.contains(worker_id)) return;
  log(Json{{"op", "disconnect"}, {"worker", worker_id}});
}

std::vector<ClientInfo> Scheduler::clients() const {
  std::vector<ClientInfo> out;
  for (const auto& [_, c] : clients_) out.push_back(c);
  return out;
}

const Ticket* Scheduler::find(TicketId id) const {
  auto it = tickets_.find(id);
  return it == tickets_.end() ? nullptr : &it->second;
}

const std::optional<TaskDescriptor> Scheduler::descriptor(const std::string& task_id) const {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second;
}

bool Scheduler::operator==(const Scheduler& other) const {
  return tickets_ == other.tickets_ && projects_ == other.projects_ && tasks_ == other.tasks_ &&
         clients_ == other.clients_ && next_id_ == other.next_id_;
}

}  // namespace vc::sched
