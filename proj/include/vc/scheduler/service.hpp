#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>

#include "vc/scheduler/scheduler.hpp"
#include "vc/util/time.hpp"

namespace vc::sched {

// Single-writer owner of a Scheduler. Every call is serialized under one
// mutex and stamped with the injected clock; listeners run after the lock
// is released, on the calling thread.
class SchedulerService {
 public:
  using CompletionListener = std::function<void(const Ticket&)>;
  using WorkListener = std::function<void()>;
  using ListenerId = std::uint64_t;

  SchedulerService(Scheduler scheduler, std::shared_ptr<const Clock> clock);

  const Clock& clock() const { return *clock_; }
  TimestampMs now() const { return clock_->now(); }

  void register_project(const std::string& project_id);
  std::vector<TicketId> enqueue(const std::string& project_id, const TaskDescriptor& task,
                                std::span<const Json> inputs);
  std::optional<Ticket> next_ticket(const std::string& worker_id);
  SubmitOutcome submit_result(TicketId id, const std::string& worker_id, Json result);
  void record_error(ErrorReport report);

  void client_connected(const std::string& worker_id, const std::string& user_agent);
  void client_disconnected(const std::string& worker_id);

  ProjectStats project_stats(const std::string& project_id) const;
  std::vector<ProjectStats> all_stats() const;
  std::optional<Ticket> ticket(TicketId id) const;
  std::optional<TaskDescriptor> descriptor(const std::string& task_id) const;

  // Runs `f(const Scheduler&)` under the lock.
  template <typename F>
  auto inspect(F&& f) const {
    std::lock_guard lock(mutex_);
    return f(static_cast<const Scheduler&>(scheduler_));
  }

  ListenerId on_completed(CompletionListener listener);
  ListenerId on_work_available(WorkListener listener);
  void remove_listener(ListenerId id);

  void flush();

 private:
  void notify_completed(const Ticket& ticket);
  void notify_work();

  mutable std::mutex mutex_;
  Scheduler scheduler_;
  std::shared_ptr<const Clock> clock_;

  mutable std::mutex listener_mutex_;
  ListenerId next_listener_ = 1;
  std::map<ListenerId, CompletionListener> completion_listeners_;
  std::map<ListenerId, WorkListener> work_listeners_;
};

}  // namespace vc::sched
