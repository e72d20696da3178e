#include <gtest/gtest.h>

#include "support/live_stack.hpp"
#include "support/ws_client.hpp"
#include "vc/net/http_client.hpp"
#include "vc/util/hash.hpp"

using namespace vc;
using namespace vc::protocol;
using testing_support::LiveStack;
using testing_support::ScriptedClient;
using testing_support::StackOptions;
using testing_support::TempDir;
using testing_support::wait_until;

namespace {

net::Endpoint http_of(const LiveStack& s) { return net::Endpoint{"http", "127.0.0.1", s.port(), "/"}; }

std::vector<Json> numbers(int n) {
  std::vector<Json> v;
  for (int i = 1; i <= n; ++i) v.push_back(Json{{"candidate", i}});
  return v;
}

const TaskDescriptor kPrime = make_descriptor("is_prime", "1", {});

}  // namespace

TEST(Coordinator, StatusReportsProjects) {
  LiveStack stack;
  stack.service->enqueue("p", kPrime, numbers(10));
  const auto res = net::http_get(http_of(stack), "/status");
  ASSERT_EQ(res.status, 200);
  const auto doc = Json::parse(res.body);
  ASSERT_EQ(doc["projects"].size(), 1u);
  EXPECT_EQ(doc["projects"][0]["name"], "p");
  EXPECT_EQ(doc["projects"][0]["pending"], 10);
}

TEST(Coordinator, BusyPortIsStartupError) {
  LiveStack first;
  StackOptions opt;
  opt.port = first.port();
  EXPECT_THROW(LiveStack second(opt), coord::CoordinatorError);
}

TEST(Coordinator, MissingResourceRootIsStartupError) {
  auto service = std::make_shared<sched::SchedulerService>(sched::Scheduler(sched::SchedulerConfig{}),
                                                           std::make_shared<SystemClock>());
  coord::CoordinatorConfig cfg;
  cfg.resource_root = "/nonexistent/vc-resource-root";
  EXPECT_THROW(coord::Coordinator(cfg, service), coord::CoordinatorError);
}

TEST(Coordinator, ServesResourcesWithStableHash) {
  LiveStack stack;
  stack.resources.write("mnist-train", std::string(1000, 'x'));
  const auto a = net::http_get(http_of(stack), "/resource/mnist-train");
  const auto b = net::http_get(http_of(stack), "/resource/mnist-train");
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body, std::string(1000, 'x'));
  EXPECT_EQ(a.headers.at("x-content-hash"), sha256_hex(a.body));
  EXPECT_EQ(a.headers.at("x-content-hash"), b.headers.at("x-content-hash"));
  EXPECT_EQ(a.body, b.body);
}

TEST(Coordinator, ResourceHashFollowsContent) {
  LiveStack stack;
  stack.resources.write("data.bin", "version-one");
  auto hash = [&] { return net::http_get(http_of(stack), "/resource/data.bin").headers.at("x-content-hash"); };
  const auto h1 = hash();
  EXPECT_EQ(hash(), h1);
  stack.resources.write("data.bin", "version-two");
  const auto h2 = hash();
  EXPECT_NE(h2, h1);
  EXPECT_EQ(h2, sha256_hex("version-two"));
  stack.resources.write("data.bin", "version-one");
  EXPECT_EQ(hash(), h1);
}

TEST(Coordinator, RejectsTraversalAndUnknown) {
  LiveStack stack;
  EXPECT_EQ(net::http_get(http_of(stack), "/resource/../etc/passwd").status, 403);
  EXPECT_EQ(net::http_get(http_of(stack), "/resource/%2e%2e/etc/passwd").status, 403);
  EXPECT_EQ(net::http_get(http_of(stack), "/resource/a/../../x").status, 403);
  EXPECT_EQ(net::http_get(http_of(stack), "/resource/nope").status, 404);
}

TEST(Coordinator, InMemoryResources) {
  LiveStack stack;
  stack.coordinator->resources().put("snapshot-v1", "abc");
  const auto r = net::http_get(http_of(stack), "/resource/snapshot-v1");
  EXPECT_EQ(r.body, "abc");
  EXPECT_EQ(r.headers.at("x-content-hash"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Coordinator, HappyPathSession) {
  LiveStack stack;
  const auto ids = stack.service->enqueue("p", kPrime, numbers(1));
  ScriptedClient c(stack.port());
  const std::string wid = c.hello("agent/1.0");
  EXPECT_FALSE(wid.empty());
  c.send(make_message(TicketRequest{}));
  const auto grant = c.recv();
  ASSERT_EQ(grant.kind(), MessageKind::ticket_grant);
  const auto& g = *grant.as<TicketGrant>();
  EXPECT_EQ(g.ticket_id, ids[0]);
  EXPECT_EQ(g.task_version, kPrime.version);
  EXPECT_EQ(g.args, (Json{{"candidate", 1}}));

  c.send(make_message(TaskRequest{"is_prime"}));
  const auto payload = c.recv();
  ASSERT_EQ(payload.kind(), MessageKind::task_payload);
  EXPECT_TRUE(payload.as<TaskPayload>()->found);
  EXPECT_EQ(payload.as<TaskPayload>()->descriptor, kPrime);

  c.send(make_message(ResultSubmit{g.ticket_id, Json{{"is_prime", true}}}));
  const auto ack = c.recv();
  ASSERT_EQ(ack.kind(), MessageKind::result_ack);
  EXPECT_EQ(ack.as<ResultAck>()->outcome, SubmitOutcome::accepted);
  EXPECT_EQ(stack.service->project_stats("p").counters.executed, 1u);

  c.send(make_message(ResultSubmit{g.ticket_id, Json{{"is_prime", true}}}));
  EXPECT_EQ(c.recv().as<ResultAck>()->outcome, SubmitOutcome::duplicate);
  c.send(make_message(ResultSubmit{TicketId{999999}, Json(1)}));
  EXPECT_EQ(c.recv().as<ResultAck>()->outcome, SubmitOutcome::unknown);

  const auto clients = stack.service->inspect([](const sched::Scheduler& s) { return s.clients(); });
  ASSERT_EQ(clients.size(), 1u);
  EXPECT_EQ(clients[0].worker_id, wid);
  EXPECT_EQ(clients[0].user_agent, "agent/1.0");
}

TEST(Coordinator, NoTicketCarriesRetryHint) {
  LiveStack stack;
  ScriptedClient c(stack.port());
  c.hello();
  c.send(make_message(TicketRequest{}));
  const auto m = c.recv();
  ASSERT_EQ(m.kind(), MessageKind::no_ticket);
  EXPECT_EQ(m.as<NoTicket>()->retry_after_ms, 20);
}

TEST(Coordinator, UnknownTaskPayload) {
  LiveStack stack;
  ScriptedClient c(stack.port());
  c.hello();
  c.send(make_message(TaskRequest{"missing"}));
  EXPECT_FALSE(c.recv().as<TaskPayload>()->found);
}

TEST(Coordinator, TaskPayloadListsResourceHashes) {
  LiveStack stack;
  stack.resources.write("train.idx", "bytes");
  const auto desc = make_descriptor("knn", "1", {"train.idx", "absent"});
  stack.service->enqueue("p", desc, numbers(1));
  ScriptedClient c(stack.port());
  c.hello();
  c.send(make_message(TaskRequest{"knn"}));
  const auto p = c.recv();
  const auto& res = p.as<TaskPayload>()->resources;
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0], (ResourceRef{"train.idx", sha256_hex("bytes")}));
  EXPECT_EQ(res[1], (ResourceRef{"absent", ""}));
}

TEST(Coordinator, ErrorSubmitReturnsTicketToPool) {
  LiveStack stack;
  stack.service->enqueue("p", kPrime, numbers(1));
  ScriptedClient c(stack.port());
  c.hello();
  c.send(make_message(TicketRequest{}));
  const auto g = c.recv();
  c.send(make_message(ErrorSubmit{g.as<TicketGrant>()->ticket_id, "boom", "frame 0"}));
  ASSERT_TRUE(wait_until([&] { return stack.service->project_stats("p").counters.errors == 1; },
                         std::chrono::seconds(2)));
  const auto t = stack.service->ticket(g.as<TicketGrant>()->ticket_id);
  EXPECT_EQ(t->status, TicketStatus::pending);
  ASSERT_EQ(t->error_reports.size(), 1u);
  EXPECT_EQ(t->error_reports[0].message, "boom");
  EXPECT_EQ(t->error_reports[0].trace, "frame 0");
}

TEST(Coordinator, MalformedMessageClosesOnlyThatSession) {
  LiveStack stack;
  stack.service->enqueue("p", kPrime, numbers(1));
  ScriptedClient good(stack.port());
  good.hello();
  ScriptedClient bad(stack.port());
  bad.hello();
  bad.send_text("{not json");
  EXPECT_EQ(bad.read_until_closed(), 1008);
  good.send(make_message(TicketRequest{}));
  EXPECT_EQ(good.recv().kind(), MessageKind::ticket_grant);
}

TEST(Coordinator, RequiresHelloAndMatchingVersion) {
  LiveStack stack;
  {
    ScriptedClient c(stack.port());
    c.send(make_message(TicketRequest{}));
    EXPECT_EQ(c.read_until_closed(), 1008);
  }
  {
    ScriptedClient c(stack.port());
    c.send_text(R"({"kind":"hello","protocol_version":99,"body":{"worker_id":""}})");
    EXPECT_EQ(c.read_until_closed(), 1008);
  }
  {
    ScriptedClient c(stack.port());
    c.hello();
    c.send(make_message(NoTicket{5}));
    EXPECT_EQ(c.read_until_closed(), 1008);
  }
}

TEST(Coordinator, DisconnectAfterGrantRedistributesAfterTimeout) {
  StackOptions opt;
  opt.scheduler.redistribution_timeout = 300;
  opt.scheduler.min_redistribution_interval = 100;
  LiveStack stack(opt);
  const auto ids = stack.service->enqueue("p", kPrime, numbers(1));
  {
    ScriptedClient dying(stack.port());
    dying.hello();
    dying.send(make_message(TicketRequest{}));
    ASSERT_EQ(dying.recv().as<TicketGrant>()->ticket_id, ids[0]);
    dying.drop();
  }
  ScriptedClient survivor(stack.port());
  survivor.hello();
  survivor.send(make_message(TicketRequest{}));
  EXPECT_EQ(survivor.recv().kind(), MessageKind::no_ticket);
  std::this_thread::sleep_for(std::chrono::milliseconds(350));
  survivor.send(make_message(TicketRequest{}));
  const auto g = survivor.recv();
  ASSERT_EQ(g.kind(), MessageKind::ticket_grant);
  EXPECT_EQ(g.as<TicketGrant>()->ticket_id, ids[0]);
}

TEST(Coordinator, ConsoleRequiresToken) {
  StackOptions opt;
  opt.admin_token = "secret";
  LiveStack stack(opt);
  EXPECT_EQ(net::http_post(http_of(stack), "/console", R"({"command":"reload"})").status, 401);
  EXPECT_EQ(net::http_post(http_of(stack), "/console", R"({"command":"reload"})", {{"X-Admin-Token", "wrong"}}).status,
            401);
  EXPECT_EQ(net::http_post(http_of(stack), "/console", R"({"command":"reload"})", {{"X-Admin-Token", "secret"}}).status,
            200);
}

TEST(Coordinator, ConsoleRejectsUnknownCommands) {
  LiveStack stack;
  EXPECT_EQ(net::http_post(http_of(stack), "/console", R"({"command":"eval","code":"x"})").status, 400);
  EXPECT_EQ(net::http_post(http_of(stack), "/console", R"({"command":"redirect"})").status, 400);
  EXPECT_EQ(net::http_post(http_of(stack), "/console", "garbage").status, 400);
  EXPECT_EQ(net::http_get(http_of(stack), "/console").status, 405);
}

TEST(Coordinator, ConsoleBroadcastsToEverySession) {
  LiveStack stack;
  ScriptedClient a(stack.port()), b(stack.port());
  a.hello();
  b.hello();
  for (const auto& [body, command] :
       {std::pair{std::string(R"({"command":"reload"})"), ControlCommand::reload},
        std::pair{std::string(R"({"command":"redirect","url":"ws://10.0.0.1:9/distributor"})"), ControlCommand::redirect},
        std::pair{std::string(R"({"command":"stop"})"), ControlCommand::stop}}) {
    const auto res = net::http_post(http_of(stack), "/console", body);
    ASSERT_EQ(res.status, 200);
    EXPECT_EQ(Json::parse(res.body)["delivered"], 2);
    for (auto* c : {&a, &b}) {
      const auto m = c->recv();
      ASSERT_EQ(m.kind(), MessageKind::control);
      EXPECT_EQ(m.as<Control>()->command, command);
      if (command == ControlCommand::redirect) {
        EXPECT_EQ(m.as<Control>()->url, "ws://10.0.0.1:9/distributor");
      }
    }
  }
}

TEST(Coordinator, StatusCountsAfterPartialCompletion) {
  LiveStack stack;
  stack.service->enqueue("p", kPrime, numbers(10));
  ScriptedClient c(stack.port());
  c.hello();
  for (int i = 0; i < 4; ++i) {
    c.send(make_message(TicketRequest{}));
    const auto g = c.recv();
    c.send(make_message(ResultSubmit{g.as<TicketGrant>()->ticket_id, Json{{"is_prime", false}}}));
    c.recv();
  }
  const auto doc = Json::parse(net::http_get(http_of(stack), "/status").body);
  const auto recount = stack.service->inspect([](const sched::Scheduler& s) { return s.recount("p"); });
  EXPECT_EQ(doc["projects"][0]["pending"], 6);
  EXPECT_EQ(doc["projects"][0]["executed"], 4);
  EXPECT_EQ(doc["projects"][0]["pending"], recount.pending);
  EXPECT_EQ(doc["clients"].size(), 1u);
}

TEST(Coordinator, StaticRouteServesWorkerPage) {
  TempDir web;
  web.write("worker.html", "<!doctype html><title>worker</title>");
  StackOptions opt;
  opt.static_root = web.path();
  LiveStack stack(opt);
  const auto r = net::http_get(http_of(stack), "/worker.html");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body, "<!doctype html><title>worker</title>");
  EXPECT_NE(r.headers.at("content-type").find("text/html"), std::string::npos);
  EXPECT_EQ(net::http_get(http_of(stack), "/missing.html").status, 404);
  EXPECT_EQ(net::http_get(http_of(stack), "/../secret").status, 403);
}

TEST(Coordinator, CustomAsyncRoutes) {
  LiveStack stack;
  std::vector<std::thread> threads;
  stack.coordinator->add_route("POST", "/echo", [&](const coord::HttpRequest& req, coord::Responder respond) {
    threads.emplace_back([body = req.body, respond] {
      std::this_thread::sleep_for(std::chrono::milliseconds(30));
      respond(coord::HttpReply{201, body, "text/plain", {}});
    });
  });
  const auto r = net::http_post(http_of(stack), "/echo", "hi");
  EXPECT_EQ(r.status, 201);
  EXPECT_EQ(r.body, "hi");
  for (auto& t : threads) t.join();
}

TEST(Coordinator, StopFlushesJournalForReplay) {
  TempDir dir;
  StackOptions opt;
  opt.scheduler.persistence_path = dir.path() / "journal.jsonl";
  {
    LiveStack stack(opt);
    stack.service->enqueue("p", kPrime, numbers(5));
    ScriptedClient c(stack.port());
    c.hello();
    for (int i = 0; i < 3; ++i) {
      c.send(make_message(TicketRequest{}));
      const auto g = c.recv();
      if (i < 2) {
        c.send(make_message(ResultSubmit{g.as<TicketGrant>()->ticket_id, Json{{"is_prime", true}}}));
        c.recv();
      }
    }
    const auto before = stack.service->inspect([](const sched::Scheduler& s) { return s.tickets(); });
    stack.coordinator->stop();
    const auto replayed = sched::Scheduler::open(opt.scheduler);
    EXPECT_EQ(replayed.tickets(), before);
    EXPECT_EQ(replayed.project_stats("p").counters, stack.service->project_stats("p").counters);
  }
}
