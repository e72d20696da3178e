#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "support/live_stack.hpp"
#include "vc/framework/framework.hpp"
#include "vc/net/http_client.hpp"
#include "vc/util/hash.hpp"
#include "vc/worker/worker.hpp"

using namespace vc;
using namespace vc::worker;
using testing_support::LiveStack;
using testing_support::StackOptions;
using testing_support::wait_until;

namespace {

std::shared_ptr<const std::string> blob(std::size_t n, char c = 'a') {
  return std::make_shared<const std::string>(n, c);
}

std::shared_ptr<TaskRegistry> builtin_registry() {
  auto r = std::make_shared<TaskRegistry>();
  fw::register_builtin_tasks(*r);
  return r;
}

WorkerConfig config_for(const LiveStack& s) {
  WorkerConfig cfg;
  cfg.endpoint = s.ws_url();
  cfg.initial_backoff_ms = 20;
  cfg.max_backoff_ms = 200;
  return cfg;
}

std::size_t executed(const LiveStack& s, const std::string& project) {
  return s.service->project_stats(project).counters.executed;
}

}  // namespace

TEST(LruCache, EvictsFirstInsertedWhenFull) {
  LruCache cache(100);
  cache.put("A", blob(60), "ha");
  cache.put("B", blob(60), "hb");
  EXPECT_FALSE(cache.contains("A"));
  EXPECT_TRUE(cache.contains("B"));
  EXPECT_EQ(cache.size_bytes(), 60u);
  EXPECT_EQ(cache.evictions(), 1u);
}

TEST(LruCache, RecentAccessProtectsEntry) {
  LruCache cache(100);
  cache.put("A", blob(30), "ha");
  cache.put("B", blob(30), "hb");
  ASSERT_NE(cache.get("A"), nullptr);
  cache.put("C", blob(50), "hc");
  EXPECT_TRUE(cache.contains("A"));
  EXPECT_FALSE(cache.contains("B"));
  EXPECT_TRUE(cache.contains("C"));
}

TEST(LruCache, OversizedBlobIsNotRetained) {
  LruCache cache(100);
  cache.put("A", blob(40), "ha");
  cache.put("huge", blob(101), "hh");
  EXPECT_FALSE(cache.contains("huge"));
  EXPECT_TRUE(cache.contains("A"));
}

TEST(LruCache, CapacityHoldsUnderRandomWorkload) {
  std::mt19937_64 rng(1);
  LruCache cache(1000);
  std::vector<std::string> order;  // oracle: front = most recent
  std::map<std::string, std::size_t> sizes;
  for (int step = 0; step < 5000; ++step) {
    const std::string name = "r" + std::to_string(rng() % 40);
    if (rng() % 3 == 0) {
      const bool hit = cache.get(name) != nullptr;
      const auto it = std::find(order.begin(), order.end(), name);
      ASSERT_EQ(hit, it != order.end());
      if (hit) {
        order.erase(it);
        order.insert(order.begin(), name);
      }
      continue;
    }
    const std::size_t n = 1 + rng() % 400;
    cache.put(name, blob(n), "h");
    if (auto it = std::find(order.begin(), order.end(), name); it != order.end()) order.erase(it);
    sizes[name] = n;
    std::size_t used = 0;
    for (const auto& o : order) used += sizes[o];
    while (!order.empty() && used + n > 1000) {
      used -= sizes[order.back()];
      order.pop_back();
    }
    order.insert(order.begin(), name);
    ASSERT_LE(cache.size_bytes(), cache.capacity());
    ASSERT_EQ(cache.entry_count(), order.size());
    for (const auto& o : order) ASSERT_TRUE(cache.contains(o)) << o;
  }
}

TEST(LruCache, HashMismatchRefetchesOnceThenFails) {
  LruCache cache(1000);
  int calls = 0;
  EXPECT_THROW(cache.get_or_fetch("x", sha256_hex("good"),
                                  [&](const std::string&) {
                                    ++calls;
                                    return FetchResult{std::make_shared<const std::string>("bad"), ""};
                                  }),
               CacheError);
  EXPECT_EQ(calls, 2);
  EXPECT_FALSE(cache.contains("x"));

  calls = 0;
  auto bytes = cache.get_or_fetch("y", sha256_hex("good"), [&](const std::string&) {
    ++calls;
    return FetchResult{std::make_shared<const std::string>(calls == 1 ? "corrupt" : "good"), ""};
  });
  EXPECT_EQ(*bytes, "good");
  EXPECT_EQ(calls, 2);
}

TEST(LruCache, HitAvoidsFetchAndStaleHashRefetches) {
  LruCache cache(1000);
  int calls = 0;
  auto fetch = [&](const std::string&) {
    ++calls;
    return FetchResult{std::make_shared<const std::string>(calls == 1 ? "v1" : "v2"), ""};
  };
  cache.get_or_fetch("r", "", fetch);
  cache.get_or_fetch("r", sha256_hex("v1"), fetch);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(*cache.get_or_fetch("r", sha256_hex("v2"), fetch), "v2");
  EXPECT_EQ(calls, 2);
}

TEST(ExecuteTask, IsPrimeMatchesTrialDivision) {
  const auto t = fw::is_prime_task();
  TaskState state;
  TaskContext ctx;
  ctx.state = &state;
  for (std::uint64_t n : {1ull, 2ull, 4ull, 7ull, 7919ull, 7921ull}) {
    bool oracle = true;
    for (std::uint64_t d = 2; d < n; ++d)
      if (n % d == 0) oracle = false;
    const auto r = execute_task(t, Json{{"candidate", n}}, ctx);
    ASSERT_TRUE(std::holds_alternative<Json>(r));
    EXPECT_EQ(std::get<Json>(r), (Json{{"is_prime", oracle}})) << n;
  }
}

TEST(ExecuteTask, FailureBecomesErrorWithTrace) {
  TaskImpl t{"boom", "1", {}, 1, [](const Json&, TaskContext&) -> Json { throw TaskFailure("deliberate"); }};
  TaskImpl u{"oops", "1", {}, 1, [](const Json& a, TaskContext&) -> Json { return a.at("missing"); }};
  TaskContext ctx;
  for (const auto* impl : {&t, &u}) {
    const auto r = execute_task(*impl, Json::object(), ctx);
    ASSERT_TRUE(std::holds_alternative<TaskError>(r));
    EXPECT_FALSE(std::get<TaskError>(r).message.empty());
    EXPECT_FALSE(std::get<TaskError>(r).trace.empty());
  }
}

TEST(Worker, DrainsQueueThenIdles) {
  LiveStack stack;
  const auto impl = fw::is_prime_task();
  stack.service->enqueue("p", impl.descriptor(), fw::prime_inputs(100));
  Worker w(config_for(stack), builtin_registry());
  std::jthread t([&](std::stop_token st) { w.run(st); });
  ASSERT_TRUE(wait_until([&] { return executed(stack, "p") == 100; }, std::chrono::seconds(20)));
  const auto ids = stack.service->inspect([](const sched::Scheduler& s) {
    std::vector<std::pair<std::size_t, Json>> out;
    for (const auto& [id, tk] : s.tickets()) out.emplace_back(tk.input_index, *tk.result);
    return out;
  });
  for (const auto& [index, result] : ids) EXPECT_EQ(result["is_prime"], fw::is_prime(index + 1)) << index;
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  const auto stats = w.stats();
  EXPECT_EQ(stats.processed, 100u);
  EXPECT_EQ(stats.duplicates, 0u);
  EXPECT_EQ(stats.errors, 0u);
  t.request_stop();
}

TEST(Worker, RetriesUntilCoordinatorStarts) {
  const auto port = testing_support::free_port();
  auto registry = builtin_registry();
  WorkerConfig cfg;
  cfg.endpoint = "ws://127.0.0.1:" + std::to_string(port) + "/distributor";
  cfg.initial_backoff_ms = 20;
  cfg.max_backoff_ms = 100;
  Worker w(cfg, registry);
  std::jthread t([&](std::stop_token st) { w.run(st); });
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  EXPECT_EQ(w.stats().connects, 0u);
  StackOptions opt;
  opt.port = port;
  LiveStack stack(opt);
  stack.service->enqueue("p", fw::is_prime_task().descriptor(), fw::prime_inputs(20));
  EXPECT_TRUE(wait_until([&] { return executed(stack, "p") == 20; }, std::chrono::seconds(10)));
  EXPECT_GE(w.stats().connects, 1u);
}

TEST(Worker, StopCommandFinishesInFlightTicket) {
  LiveStack stack;
  auto registry = std::make_shared<TaskRegistry>();
  std::atomic<bool> started{false};
  registry->add(TaskImpl{"slow", "1", {}, 1, [&](const Json& a, TaskContext&) {
                           started = true;
                           std::this_thread::sleep_for(std::chrono::milliseconds(300));
                           return a;
                         }});
  const auto ids = stack.service->enqueue("p", registry->find("slow")->descriptor(), std::vector<Json>{Json(1), Json(2)});
  Worker w(config_for(stack), registry);
  ExitReason reason{};
  std::jthread t([&](std::stop_token st) { reason = w.run(st); });
  ASSERT_TRUE(wait_until([&] { return started.load(); }, std::chrono::seconds(5)));
  EXPECT_EQ(stack.coordinator->broadcast(protocol::Control{protocol::ControlCommand::stop, ""}), 1u);
  t.join();
  EXPECT_EQ(reason, ExitReason::stop_command);
  EXPECT_EQ(stack.service->ticket(ids[0])->status, protocol::TicketStatus::completed);
  EXPECT_EQ(stack.service->ticket(ids[1])->status, protocol::TicketStatus::pending);
  EXPECT_EQ(w.stats().processed, 1u);
}

TEST(Worker, RefusesUnregisteredTask) {
  LiveStack stack;
  const auto desc = protocol::make_descriptor("not_here", "1", {});
  const auto ids = stack.service->enqueue("p", desc, std::vector<Json>{Json(1)});
  Worker w(config_for(stack), builtin_registry());
  std::jthread t([&](std::stop_token st) { w.run(st); });
  ASSERT_TRUE(wait_until([&] { return w.stats().refusals >= 1; }, std::chrono::seconds(5)));
  const auto ticket = stack.service->ticket(ids[0]);
  EXPECT_EQ(ticket->status, protocol::TicketStatus::pending);
  ASSERT_FALSE(ticket->error_reports.empty());
  EXPECT_NE(ticket->error_reports[0].message.find("not registered"), std::string::npos);
  EXPECT_GE(w.stats().connects, 1u);
}

TEST(Worker, RefusesVersionMismatch) {
  LiveStack stack;
  const auto stale = protocol::make_descriptor("is_prime", "0", {});
  stack.service->enqueue("p", stale, fw::prime_inputs(1));
  Worker w(config_for(stack), builtin_registry());
  std::jthread t([&](std::stop_token st) { w.run(st); });
  ASSERT_TRUE(wait_until([&] { return w.stats().refusals >= 1; }, std::chrono::seconds(5)));
  EXPECT_EQ(executed(stack, "p"), 0u);
}

TEST(Worker, FaultInjectionCompletesAfterRetries) {
  StackOptions opt;
  opt.scheduler.min_redistribution_interval = 50;
  opt.scheduler.redistribution_timeout = 5000;
  LiveStack stack(opt);
  std::vector<Json> inputs;
  for (int i = 1; i <= 10; ++i) inputs.push_back(Json{{"candidate", 100 + i}, {"fail_times", i % 3}});
  stack.service->enqueue("p", fw::flaky_prime_task().descriptor(), inputs);
  Worker w(config_for(stack), builtin_registry());
  std::jthread t([&](std::stop_token st) { w.run(st); });
  ASSERT_TRUE(wait_until([&] { return executed(stack, "p") == 10; }, std::chrono::seconds(20)));
  const auto counters = stack.service->project_stats("p").counters;
  std::size_t injected = 0;
  for (int i = 1; i <= 10; ++i) injected += i % 3;
  EXPECT_EQ(counters.errors, injected);
  EXPECT_EQ(w.stats().errors, injected);
  for (const auto& [id, tk] : stack.service->inspect([](const sched::Scheduler& s) { return s.tickets(); })) {
    EXPECT_EQ((*tk.result)["is_prime"], fw::is_prime(100 + tk.input_index + 1));
    for (const auto& e : tk.error_reports) EXPECT_FALSE(e.trace.empty());
  }
}

TEST(Worker, ErrorHookRunsAfterReport) {
  StackOptions opt;
  opt.scheduler.min_redistribution_interval = 50;
  LiveStack stack(opt);
  stack.service->enqueue("p", fw::flaky_prime_task().descriptor(),
                         std::vector<Json>{Json{{"candidate", 5}, {"fail_times", 1}}});
  std::atomic<int> hooks{0};
  auto cfg = config_for(stack);
  cfg.on_task_error = [&] { ++hooks; };
  Worker w(cfg, builtin_registry());
  std::jthread t([&](std::stop_token st) { w.run(st); });
  ASSERT_TRUE(wait_until([&] { return executed(stack, "p") == 1; }, std::chrono::seconds(10)));
  EXPECT_EQ(hooks.load(), 1);
}

TEST(Worker, FetchesDeclaredResourcesThroughCache) {
  LiveStack stack;
  stack.resources.write("table.txt", "3");
  auto registry = std::make_shared<TaskRegistry>();
  registry->add(TaskImpl{"scale", "1", {"table.txt"}, 1, [](const Json& a, TaskContext& ctx) {
                           const int k = std::stoi(*ctx.fetch("table.txt"));
                           return Json(a.get<int>() * k);
                         }});
  stack.service->enqueue("p", registry->find("scale")->descriptor(), std::vector<Json>{Json(1), Json(2), Json(5)});
  Worker w(config_for(stack), registry);
  std::jthread t([&](std::stop_token st) { w.run(st); });
  ASSERT_TRUE(wait_until([&] { return executed(stack, "p") == 3; }, std::chrono::seconds(10)));
  EXPECT_TRUE(w.cache().contains("table.txt"));
  EXPECT_EQ(w.cache().hash_of("table.txt"), sha256_hex("3"));
  std::vector<Json> results;
  for (const auto& [id, tk] : stack.service->inspect([](const sched::Scheduler& s) { return s.tickets(); }))
    results.push_back(*tk.result);
  EXPECT_EQ(results, (std::vector<Json>{Json(3), Json(6), Json(15)}));
}

TEST(Worker, ReloadClearsCachesAndContinues) {
  LiveStack stack;
  stack.resources.write("table.txt", "2");
  auto registry = std::make_shared<TaskRegistry>();
  registry->add(TaskImpl{"scale", "1", {"table.txt"}, 1, [](const Json& a, TaskContext& ctx) {
                           ctx.state->emplace("touched", true);
                           return Json(a.get<int>() * std::stoi(*ctx.fetch("table.txt")));
                         }});
  const auto desc = registry->find("scale")->descriptor();
  stack.service->enqueue("p", desc, std::vector<Json>{Json(1)});
  Worker w(config_for(stack), registry);
  std::jthread t([&](std::stop_token st) { w.run(st); });
  ASSERT_TRUE(wait_until([&] { return executed(stack, "p") == 1; }, std::chrono::seconds(10)));
  ASSERT_TRUE(w.cache().contains("table.txt"));
  stack.coordinator->broadcast(protocol::Control{protocol::ControlCommand::reload, ""});
  ASSERT_TRUE(wait_until([&] { return w.stats().reloads == 1; }, std::chrono::seconds(5)));
  EXPECT_FALSE(w.cache().contains("table.txt"));
  stack.service->enqueue("p", desc, std::vector<Json>{Json(4)});
  ASSERT_TRUE(wait_until([&] { return executed(stack, "p") == 2; }, std::chrono::seconds(10)));
}

TEST(Worker, RedirectMovesToAnotherCoordinator) {
  LiveStack first, second;
  second.service->enqueue("p", fw::is_prime_task().descriptor(), fw::prime_inputs(5));
  Worker w(config_for(first), builtin_registry());
  std::jthread t([&](std::stop_token st) { w.run(st); });
  ASSERT_TRUE(wait_until([&] { return w.stats().connects == 1; }, std::chrono::seconds(5)));
  ASSERT_TRUE(wait_until([&] { return first.coordinator->session_ids().size() == 1; }, std::chrono::seconds(5)));
  first.coordinator->broadcast(protocol::Control{protocol::ControlCommand::redirect, second.ws_url()});
  EXPECT_TRUE(wait_until([&] { return executed(second, "p") == 5; }, std::chrono::seconds(10)));
  EXPECT_EQ(w.endpoint(), second.ws_url());
}

TEST(Worker, ReconnectsAfterCoordinatorRestart) {
  const auto port = testing_support::free_port();
  StackOptions opt;
  opt.port = port;
  auto stack = std::make_unique<LiveStack>(opt);
  WorkerConfig cfg = config_for(*stack);
  Worker w(cfg, builtin_registry());
  std::jthread t([&](std::stop_token st) { w.run(st); });
  ASSERT_TRUE(wait_until([&] { return w.stats().connects == 1; }, std::chrono::seconds(5)));
  stack.reset();
  stack = std::make_unique<LiveStack>(opt);
  stack->service->enqueue("p", fw::is_prime_task().descriptor(), fw::prime_inputs(3));
  EXPECT_TRUE(wait_until([&] { return executed(*stack, "p") == 3; }, std::chrono::seconds(10)));
  EXPECT_GE(w.stats().connects, 2u);
}
