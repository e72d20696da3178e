#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "vc/scheduler/service.hpp"
#include "vc/worker/task.hpp"

namespace vc::fw {

class FrameworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// block() gave up; `incomplete` lists the tickets still outstanding.
class BlockTimeout : public FrameworkError {
 public:
  BlockTimeout(const std::string& what, std::vector<protocol::TicketId> incomplete)
      : FrameworkError(what), incomplete_(std::move(incomplete)) {}
  const std::vector<protocol::TicketId>& incomplete() const { return incomplete_; }

 private:
  std::vector<protocol::TicketId> incomplete_;
};

class Runtime;

class TaskHandle {
 public:
  const std::string& project_id() const { return project_; }
  const std::string& task_id() const { return descriptor_.task_id; }
  const protocol::TaskDescriptor& descriptor() const { return descriptor_; }
  std::size_t input_count() const { return input_count_; }
  const std::vector<protocol::TicketId>& tickets() const { return tickets_; }

  // Splits the inputs into tickets; callable once per handle.
  void calculate(const std::vector<Json>& inputs);

  // Waits for every ticket and returns one result per input, in input order.
  std::vector<Json> block(std::optional<std::chrono::milliseconds> timeout = std::nullopt);

  TaskHandle(TaskHandle&& other) noexcept;
  TaskHandle& operator=(TaskHandle&& other) noexcept;
  ~TaskHandle();

 private:
  friend class Runtime;
  struct Tracker;
  TaskHandle(Runtime& rt, std::string project, protocol::TaskDescriptor descriptor);

  Runtime* runtime_;
  std::string project_;
  protocol::TaskDescriptor descriptor_;
  std::size_t input_count_ = 0;
  std::vector<protocol::TicketId> tickets_;
  std::shared_ptr<Tracker> tracker_;
  std::optional<sched::SchedulerService::ListenerId> listener_;
};

// Ties the task catalog (tasks the workers can run) to a scheduler.
class Runtime {
 public:
  Runtime(std::shared_ptr<sched::SchedulerService> service, std::shared_ptr<const worker::TaskRegistry> catalog);

  TaskHandle create_task(const std::string& project, const std::string& task_id);

  sched::SchedulerService& service() { return *service_; }
  const worker::TaskRegistry& catalog() const { return *catalog_; }

 private:
  std::shared_ptr<sched::SchedulerService> service_;
  std::shared_ptr<const worker::TaskRegistry> catalog_;
};

// A user program with its own entry point.
class Project {
 public:
  explicit Project(std::string name) : name_(std::move(name)) {}
  virtual ~Project() = default;
  const std::string& name() const { return name_; }
  virtual void run(Runtime& runtime) = 0;

 protected:
  TaskHandle create_task(Runtime& runtime, const std::string& task_id) { return runtime.create_task(name_, task_id); }

 private:
  std::string name_;
};

// Splits `inputs` exactly as calculate() does and runs each chunk through the
// task in-process; the reference for distributed results.
std::vector<Json> run_locally(const worker::TaskImpl& task, const std::vector<Json>& inputs, worker::TaskContext& ctx);

// Trial division up to sqrt(candidate); 1 counts as prime.
bool is_prime(std::uint64_t candidate);

worker::TaskImpl is_prime_task();

// Fails the first `fail_times` attempts at each input value within this
// process, then behaves like is_prime. Input {"candidate": n, "fail_times": k}.
worker::TaskImpl flaky_prime_task();

// Every task shipped with the framework.
void register_builtin_tasks(worker::TaskRegistry& registry);

// Candidates 1..max_candidate, as {"candidate": i}.
std::vector<Json> prime_inputs(std::uint64_t max_candidate);

class PrimeListMakerProject : public Project {
 public:
  explicit PrimeListMakerProject(std::uint64_t max_candidate,
                                 std::optional<std::chrono::milliseconds> timeout = std::nullopt)
      : Project("PrimeListMakerProject"), max_(max_candidate), timeout_(timeout) {}
  void run(Runtime& runtime) override;
  const std::vector<Json>& results() const { return results_; }
  std::vector<std::uint64_t> primes() const;

 private:
  std::uint64_t max_;
  std::optional<std::chrono::milliseconds> timeout_;
  std::vector<Json> results_;
};

}  // namespace vc::fw
