#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <stop_token>
#include <string>

#include "vc/protocol/message.hpp"
#include "vc/util/time.hpp"
#include "vc/worker/lru_cache.hpp"
#include "vc/worker/task.hpp"

namespace vc::worker {

struct WorkerConfig {
  std::string endpoint = "ws://127.0.0.1:8080/distributor";
  std::size_t cache_bytes = 256u << 20;
  std::string user_agent = "vc-worker";
  DurationMs initial_backoff_ms = 100;
  DurationMs max_backoff_ms = 30000;
  std::chrono::milliseconds reply_timeout{60000};
  // Called after an error report has been sent; used to re-exec the process.
  std::function<void()> on_task_error;
};

struct WorkerStats {
  std::size_t processed = 0;  // results acknowledged as accepted
  std::size_t duplicates = 0;
  std::size_t errors = 0;     // error reports sent, refusals included
  std::size_t refusals = 0;
  std::size_t connects = 0;
  std::size_t reloads = 0;
};

enum class ExitReason { stop_command, stop_requested };

// Native implementation of the basic program: connect, request a ticket,
// fetch task metadata and resources, execute, submit, repeat.
class Worker {
 public:
  Worker(WorkerConfig cfg, std::shared_ptr<const TaskRegistry> registry);
  ~Worker();

  ExitReason run(std::stop_token stop);

  WorkerStats stats() const;
  std::string worker_id() const;
  std::string endpoint() const;
  LruCache& cache() { return cache_; }

 private:
  class Connection;
  enum class SessionEnd { lost, redirect, stop_command, stop_requested };

  SessionEnd session(Connection& conn, std::stop_token stop);
  std::optional<protocol::WireMessage> await(Connection& conn, std::stop_token stop, protocol::MessageKind kind);
  bool apply_controls(SessionEnd& end);
  void handle_grant(Connection& conn, std::stop_token stop, const protocol::TicketGrant& grant);
  void submit_error(Connection& conn, protocol::TicketId id, std::string message, std::string trace, bool refusal);
  FetchResult fetch_resource(const std::string& name);
  void reset_task_state();

  WorkerConfig cfg_;
  std::shared_ptr<const TaskRegistry> registry_;
  LruCache cache_;
  TaskState state_;
  std::map<std::string, std::vector<protocol::ResourceRef>> known_tasks_;  // task_id@version -> resources
  std::vector<protocol::Control> controls_;

  mutable std::mutex mutex_;
  std::string endpoint_;
  std::string worker_id_;
  WorkerStats stats_;
};

}  // namespace vc::worker
