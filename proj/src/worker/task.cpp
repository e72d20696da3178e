#include "vc/worker/task.hpp"

#include <boost/stacktrace.hpp>

#include <sstream>
#include <typeinfo>

namespace vc::worker {

std::string current_stacktrace() {
  std::ostringstream os;
  os << boost::stacktrace::stacktrace();
  std::string s = os.str();
  return s.empty() ? "(no stack frames available)" : s;
}

TaskFailure::TaskFailure(const std::string& what) : std::runtime_error(what), trace_(current_stacktrace()) {}

void TaskRegistry::add(TaskImpl impl) {
  protocol::validate(impl.descriptor());
  if (!impl.run) throw std::invalid_argument("task '" + impl.task_id + "' has no implementation");
  const std::string id = impl.task_id;
  tasks_[id] = std::move(impl);
}

const TaskImpl* TaskRegistry::find(const std::string& task_id) const {
  auto it = tasks_.find(task_id);
  return it == tasks_.end() ? nullptr : &it->second;
}

std::vector<protocol::TaskDescriptor> TaskRegistry::descriptors() const {
  std::vector<protocol::TaskDescriptor> out;
  for (const auto& [id, impl] : tasks_) out.push_back(impl.descriptor());
  return out;
}

TaskOutcome execute_task(const TaskImpl& impl, const Json& args, TaskContext& ctx) {
  try {
    return impl.run(args, ctx);
  } catch (const TaskFailure& e) {
    return TaskError{e.what(), e.trace()};
  } catch (const std::exception& e) {
    return TaskError{std::string(typeid(e).name()) + ": " + e.what(), current_stacktrace()};
  } catch (...) {
    return TaskError{"unknown exception", current_stacktrace()};
  }
}

}  // namespace vc::worker
