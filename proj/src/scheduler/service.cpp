#include "vc/scheduler/service.hpp"

#include <vector>

namespace vc::sched {

SchedulerService::SchedulerService(Scheduler scheduler, std::shared_ptr<const Clock> clock)
    : scheduler_(std::move(scheduler)), clock_(std::move(clock)) {}

void SchedulerService::register_project(const std::string& project_id) {
  std::lock_guard lock(mutex_);
  scheduler_.register_project(project_id);
}

std::vector<TicketId> SchedulerService::enqueue(const std::string& project_id, const TaskDescriptor& task,
                                                std::span<const Json> inputs) {
  std::vector<TicketId> ids;
  {
    std::lock_guard lock(mutex_);
    ids = scheduler_.enqueue(project_id, task, inputs, clock_->now());
  }
  notify_work();
  return ids;
}

std::optional<Ticket> SchedulerService::next_ticket(const std::string& worker_id) {
  std::lock_guard lock(mutex_);
  return scheduler_.next_ticket(clock_->now(), worker_id);
}

SubmitOutcome SchedulerService::submit_result(TicketId id, const std::string& worker_id, Json result) {
  SubmitOutcome outcome;
  std::optional<Ticket> completed;
  {
    std::lock_guard lock(mutex_);
    outcome = scheduler_.submit_result(id, worker_id, std::move(result), clock_->now());
    if (outcome == SubmitOutcome::accepted) completed = *scheduler_.find(id);
  }
  if (completed) notify_completed(*completed);
  return outcome;
}

void SchedulerService::record_error(ErrorReport report) {
  {
    std::lock_guard lock(mutex_);
    if (report.at == 0) report.at = clock_->now();
    scheduler_.record_error(std::move(report));
  }
  notify_work();
}

void SchedulerService::client_connected(const std::string& worker_id, const std::string& user_agent) {
  std::lock_guard lock(mutex_);
  scheduler_.client_connected({worker_id, user_agent, clock_->now()});
}

void SchedulerService::client_disconnected(const std::string& worker_id) {
  std::lock_guard lock(mutex_);
  scheduler_.client_disconnected(worker_id);
}

ProjectStats SchedulerService::project_stats(const std::string& project_id) const {
  std::lock_guard lock(mutex_);
  return scheduler_.project_stats(project_id);
}

std::vector<ProjectStats> SchedulerService::all_stats() const {
  std::lock_guard lock(mutex_);
  std::vector<ProjectStats> out;
  for (const auto& id : scheduler_.project_ids()) out.push_back(scheduler_.project_stats(id));
  return out;
}

std::optional<Ticket> SchedulerService::ticket(TicketId id) const {
  std::lock_guard lock(mutex_);
  const Ticket* t = scheduler_.find(id);
  if (!t) return std::nullopt;
  return *t;
}

std::optional<TaskDescriptor> SchedulerService::descriptor(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  return scheduler_.descriptor(task_id);
}

SchedulerService::ListenerId SchedulerService::on_completed(CompletionListener listener) {
  std::lock_guard lock(listener_mutex_);
  const ListenerId id = next_listener_++;
  completion_listeners_.emplace(id, std::move(listener));
  return id;
}

SchedulerService::ListenerId SchedulerService::on_work_available(WorkListener listener) {
  std::lock_guard lock(listener_mutex_);
  const ListenerId id = next_listener_++;
  work_listeners_.emplace(id, std::move(listener));
  return id;
}

void SchedulerService::remove_listener(ListenerId id) {
  std::lock_guard lock(listener_mutex_);
  completion_listeners_.erase(id);
  work_listeners_.erase(id);
}

void SchedulerService::flush() {
  std::lock_guard lock(mutex_);
  scheduler_.flush_journal();
}

void SchedulerService::notify_completed(const Ticket& ticket) {
  std::vector<CompletionListener> listeners;
  {
    std::lock_guard lock(listener_mutex_);
    for (const auto& [_, l] : completion_listeners_) listeners.push_back(l);
  }
  for (const auto& l : listeners) l(ticket);
}

void SchedulerService::notify_work() {
  std::vector<WorkListener> listeners;
  {
    std::lock_guard lock(listener_mutex_);
    for (const auto& [_, l] : work_listeners_) listeners.push_back(l);
  }
  for (const auto& l : listeners) l();
}

}  // namespace vc::sched
