#include "vc/framework/framework.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

namespace vc::fw {

using protocol::TicketId;
using protocol::TicketStatus;

struct TaskHandle::Tracker {
  std::mutex mutex;
  std::condition_variable cv;
  std::set<TicketId> mine;
  std::set<TicketId> done;
};

TaskHandle::TaskHandle(Runtime& rt, std::string project, protocol::TaskDescriptor descriptor)
    : runtime_(&rt), project_(std::move(project)), descriptor_(std::move(descriptor)),
      tracker_(std::make_shared<Tracker>()) {}

TaskHandle::TaskHandle(TaskHandle&& other) noexcept
    : runtime_(other.runtime_), project_(std::move(other.project_)), descriptor_(std::move(other.descriptor_)),
      input_count_(other.input_count_), tickets_(std::move(other.tickets_)), tracker_(std::move(other.tracker_)),
      listener_(std::exchange(other.listener_, std::nullopt)) {}

TaskHandle& TaskHandle::operator=(TaskHandle&& other) noexcept {
  if (this != &other) {
    if (listener_ && runtime_) runtime_->service().remove_listener(*listener_);
    runtime_ = other.runtime_;
    project_ = std::move(other.project_);
    descriptor_ = std::move(other.descriptor_);
    input_count_ = other.input_count_;
    tickets_ = std::move(other.tickets_);
    tracker_ = std::move(other.tracker_);
    listener_ = std::exchange(other.listener_, std::nullopt);
  }
  return *this;
}

TaskHandle::~TaskHandle() {
  if (listener_ && runtime_) runtime_->service().remove_listener(*listener_);
}

void TaskHandle::calculate(const std::vector<Json>& inputs) {
  if (inputs.empty()) throw FrameworkError("calculate needs at least one input");
  if (!tickets_.empty()) throw FrameworkError("calculate was already called on this task handle");
  auto tracker = tracker_;
  // Completions are recorded before the ticket ids are known; block()
  // intersects them with this handle's tickets.
  listener_ = runtime_->service().on_completed([tracker](const protocol::Ticket& t) {
    {
      std::lock_guard lock(tracker->mutex);
      tracker->done.insert(t.ticket_id);
    }
    tracker->cv.notify_all();
  });
  tickets_ = runtime_->service().enqueue(project_, descriptor_, inputs);
  input_count_ = inputs.size();
  std::lock_guard lock(tracker_->mutex);
  tracker_->mine.insert(tickets_.begin(), tickets_.end());
}

std::vector<Json> TaskHandle::block(std::optional<std::chrono::milliseconds> timeout) {
  if (tickets_.empty()) throw FrameworkError("block called before calculate");
  auto& service = runtime_->service();
  const auto deadline =
      timeout ? std::chrono::steady_clock::now() + *timeout : std::chrono::steady_clock::time_point::max();

  auto outstanding = [&] {
    std::vector<TicketId> left;
    for (const auto& id : tickets_)
      if (!tracker_->done.count(id)) left.push_back(id);
    return left;
  };
  {
    std::unique_lock lock(tracker_->mutex);
    while (true) {
      // catch up with anything completed before our listener existed
      std::vector<TicketId> left = outstanding();
      if (left.empty()) break;
      lock.unlock();
      std::vector<TicketId> failed;
      std::vector<TicketId> finished;
      for (const auto& id : left) {
        const auto t = service.ticket(id);
        if (!t) continue;
        if (t->status == TicketStatus::completed) finished.push_back(id);
        if (t->status == TicketStatus::failed) failed.push_back(id);
      }
      lock.lock();
      tracker_->done.insert(finished.begin(), finished.end());
      if (!failed.empty()) {
        std::string ids;
        for (const auto& id : failed) ids += (ids.empty() ? "" : ", ") + std::to_string(id.value);
        throw BlockTimeout("tickets failed permanently: " + ids, failed);
      }
      if (outstanding().empty()) break;
      const auto slice = std::chrono::steady_clock::now() + std::chrono::milliseconds(200);
      tracker_->cv.wait_until(lock, std::min(deadline, slice));
      if (std::chrono::steady_clock::now() >= deadline) {
        left = outstanding();
        if (left.empty()) break;
        std::string ids;
        for (const auto& id : left) ids += (ids.empty() ? "" : ", ") + std::to_string(id.value);
        throw BlockTimeout("timed out with " + std::to_string(left.size()) + " incomplete tickets: " + ids, left);
      }
    }
  }

  std::vector<Json> results(input_count_);
  const std::size_t chunk = descriptor_.chunking;
  for (const auto& id : tickets_) {
    const auto t = service.ticket(id);
    if (!t || !t->result) throw FrameworkError("ticket " + std::to_string(id.value) + " has no result");
    const std::size_t first = t->input_index;
    if (chunk == 1) {
      results.at(first) = *t->result;
      continue;
    }
    const Json& r = *t->result;
    const std::size_t expect = std::min(chunk, input_count_ - first);
    if (!r.is_array() || r.size() != expect)
      throw FrameworkError("ticket " + std::to_string(id.value) + " returned " + std::to_string(r.size()) +
                           " results for a chunk of " + std::to_string(expect));
    for (std::size_t k = 0; k < expect; ++k) results.at(first + k) = r[k];
  }
  return results;
}

Runtime::Runtime(std::shared_ptr<sched::SchedulerService> service, std::shared_ptr<const worker::TaskRegistry> catalog)
    : service_(std::move(service)), catalog_(std::move(catalog)) {
  if (!service_ || !catalog_) throw std::invalid_argument("runtime needs a scheduler service and a task catalog");
}

TaskHandle Runtime::create_task(const std::string& project, const std::string& task_id) {
  const auto* impl = catalog_->find(task_id);
  if (!impl) throw FrameworkError("unknown task '" + task_id + "'");
  service_->register_project(project);
  return TaskHandle(*this, project, impl->descriptor());
}

std::vector<Json> run_locally(const worker::TaskImpl& task, const std::vector<Json>& inputs, worker::TaskContext& ctx) {
  std::vector<Json> out;
  if (task.chunking == 1) {
    for (const auto& in : inputs) {
      auto r = worker::execute_task(task, in, ctx);
      if (auto* e = std::get_if<worker::TaskError>(&r)) throw FrameworkError(e->message);
      out.push_back(std::get<Json>(std::move(r)));
    }
    return out;
  }
  for (std::size_t i = 0; i < inputs.size(); i += task.chunking) {
    Json chunk = Json::array();
    for (std::size_t k = i; k < std::min(inputs.size(), i + task.chunking); ++k) chunk.push_back(inputs[k]);
    auto r = worker::execute_task(task, chunk, ctx);
    if (auto* e = std::get_if<worker::TaskError>(&r)) throw FrameworkError(e->message);
    for (auto& v : std::get<Json>(r)) out.push_back(std::move(v));
  }
  return out;
}

bool is_prime(std::uint64_t candidate) {
  for (std::uint64_t i = 2; i * i <= candidate; ++i)
    if (candidate % i == 0) return false;
  return true;
}

namespace {

std::uint64_t candidate_of(const Json& args) {
  if (!args.is_object() || !args.contains("candidate") || !args["candidate"].is_number_integer() ||
      args["candidate"].get<std::int64_t>() < 1)
    throw worker::TaskFailure("is_prime needs a positive integer 'candidate'");
  return args["candidate"].get<std::uint64_t>();
}

}  // namespace

worker::TaskImpl is_prime_task() {
  worker::TaskImpl t;
  t.task_id = "is_prime";
  t.revision = "1";
  t.run = [](const Json& args, worker::TaskContext&) { return Json{{"is_prime", is_prime(candidate_of(args))}}; };
  return t;
}

worker::TaskImpl flaky_prime_task() {
  auto attempts = std::make_shared<std::pair<std::mutex, std::map<std::uint64_t, int>>>();
  worker::TaskImpl t;
  t.task_id = "flaky_prime";
  t.revision = "1";
  t.run = [attempts](const Json& args, worker::TaskContext&) {
    const auto candidate = candidate_of(args);
    const int fail_times = args.value("fail_times", 1);
    int seen;
    {
      std::lock_guard lock(attempts->first);
      seen = attempts->second[candidate]++;
    }
    if (seen < fail_times)
      throw worker::TaskFailure("injected failure " + std::to_string(seen + 1) + " of " + std::to_string(fail_times) +
                                " for candidate " + std::to_string(candidate));
    return Json{{"is_prime", is_prime(candidate)}};
  };
  return t;
}

void register_builtin_tasks(worker::TaskRegistry& registry) {
  registry.add(is_prime_task());
  registry.add(flaky_prime_task());
}

std::vector<Json> prime_inputs(std::uint64_t max_candidate) {
  std::vector<Json> inputs;
  inputs.reserve(max_candidate);
  for (std::uint64_t i = 1; i <= max_candidate; ++i) inputs.push_back(Json{{"candidate", i}});
  return inputs;
}

void PrimeListMakerProject::run(Runtime& runtime) {
  auto task = create_task(runtime, "is_prime");
  task.calculate(prime_inputs(max_));
  results_ = task.block(timeout_);
}

std::vector<std::uint64_t> PrimeListMakerProject::primes() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < results_.size(); ++i)
    if (results_[i].value("is_prime", false)) out.push_back(i + 1);
  return out;
}

}  // namespace vc::fw
