#pragma once

#include <any>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "vc/protocol/types.hpp"
#include "vc/util/json.hpp"

namespace vc::worker {

// Task-local scratch space, cleared whenever the worker resets.
class TaskState {
 public:
  template <typename T>
  T* find(const std::string& key) {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : std::any_cast<T>(&it->second);
  }
  template <typename T>
  T& emplace(const std::string& key, T value) {
    return std::any_cast<T&>(values_[key] = std::move(value));
  }
  void clear() { values_.clear(); }
  std::size_t size() const { return values_.size(); }

 private:
  std::map<std::string, std::any> values_;
};

struct HttpResult {
  int status = 0;
  std::string body;
};

// What a running task can reach: resources through the cache and plain
// HTTP calls against the coordinator.
struct TaskContext {
  std::string worker_id;
  std::function<std::shared_ptr<const std::string>(const std::string& name)> fetch;
  std::function<HttpResult(const std::string& target)> get;
  std::function<HttpResult(const std::string& target, const std::string& body)> post;
  TaskState* state = nullptr;
};

using TaskFunction = std::function<Json(const Json& args, TaskContext& ctx)>;

struct TaskImpl {
  std::string task_id;
  std::string revision;  // bump when the implementation changes
  std::vector<std::string> resource_deps;
  std::size_t chunking = 1;
  TaskFunction run;

  protocol::TaskDescriptor descriptor() const {
    return protocol::make_descriptor(task_id, revision, resource_deps, chunking);
  }
};

// Thrown by tasks; records the stack at the throw site.
class TaskFailure : public std::runtime_error {
 public:
  explicit TaskFailure(const std::string& what);
  const std::string& trace() const { return trace_; }

 private:
  std::string trace_;
};

class TaskRegistry {
 public:
  void add(TaskImpl impl);
  const TaskImpl* find(const std::string& task_id) const;
  std::vector<protocol::TaskDescriptor> descriptors() const;
  std::size_t size() const { return tasks_.size(); }

 private:
  std::map<std::string, TaskImpl> tasks_;
};

struct TaskError {
  std::string message;
  std::string trace;
};

using TaskOutcome = std::variant<Json, TaskError>;

// Runs the task, converting any exception into a TaskError with a trace.
TaskOutcome execute_task(const TaskImpl& impl, const Json& args, TaskContext& ctx);

std::string current_stacktrace();

}  // namespace vc::worker
