#include "vc/worker/worker.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <condition_variable>
#include <deque>
#include <thread>

#include "vc/net/endpoint.hpp"
#include "vc/net/http_client.hpp"

namespace vc::worker {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using namespace protocol;
using Clock = std::chrono::steady_clock;

class ConnectionLost : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// WebSocket client with a standing read; the owning thread drives the
// io_context while waiting for messages.
class Worker::Connection {
 public:
  Connection() : ws_(ioc_) {}
  ~Connection() { close(); }

  void open(const net::Endpoint& ep, std::chrono::milliseconds timeout) {
    tcp::resolver resolver(ioc_);
    beast::error_code failure;
    bool done = false;
    beast::get_lowest_layer(ws_).expires_after(timeout);
    resolver.async_resolve(ep.host, std::to_string(ep.port), [&](beast::error_code ec, tcp::resolver::results_type r) {
      if (ec) {
        failure = ec;
        done = true;
        return;
      }
      beast::get_lowest_layer(ws_).async_connect(r, [&](beast::error_code ec, const tcp::endpoint&) {
        if (ec) {
          failure = ec;
          done = true;
          return;
        }
        beast::get_lowest_layer(ws_).socket().set_option(tcp::no_delay(true), ec);
        beast::get_lowest_layer(ws_).expires_never();
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
        ws_.read_message_max(64u << 20);
        ws_.async_handshake(ep.host + ":" + std::to_string(ep.port), ep.path, [&](beast::error_code ec) {
          failure = ec;
          done = true;
        });
      });
    });
    while (!done && ioc_.run_one() > 0) {
    }
    if (failure || !done) throw ConnectionLost("connect to " + ep.to_string() + " failed: " + failure.message());
    read_next();
  }

  void send(const WireMessage& msg) {
    if (failed_) throw ConnectionLost(failure_);
    const std::string text = encode_message(msg);
    bool done = false;
    beast::error_code result;
    ws_.text(true);
    ws_.async_write(asio::buffer(text), [&](beast::error_code ec, std::size_t) {
      result = ec;
      done = true;
    });
    while (!done) {
      if (ioc_.stopped()) ioc_.restart();
      ioc_.run_one();
    }
    if (result) fail("send failed: " + result.message());
  }

  // Next decoded message, or nullopt on timeout / stop. Throws ConnectionLost.
  std::optional<WireMessage> next(std::chrono::milliseconds timeout, const std::stop_token& stop) {
    const auto deadline = Clock::now() + timeout;
    while (inbox_.empty()) {
      if (failed_) throw ConnectionLost(failure_);
      if (stop.stop_requested()) return std::nullopt;
      const auto now = Clock::now();
      if (now >= deadline) return std::nullopt;
      if (ioc_.stopped()) ioc_.restart();
      ioc_.run_one_for(std::min<Clock::duration>(deadline - now, std::chrono::milliseconds(50)));
    }
    std::string text = std::move(inbox_.front());
    inbox_.pop_front();
    try {
      return decode_message(text);
    } catch (const DecodeError& e) {
      fail(std::string("undecodable message from coordinator: ") + e.what());
    }
    return std::nullopt;
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    failed_ = true;
    if (failure_.empty()) failure_ = "closed";
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
    ioc_.restart();
    ioc_.poll();
  }

 private:
  [[noreturn]] void fail(const std::string& why) {
    failed_ = true;
    failure_ = why;
    throw ConnectionLost(why);
  }

  void read_next() {
    ws_.async_read(buffer_, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        failed_ = true;
        failure_ = ec == websocket::error::closed
                       ? "closed by coordinator: " + std::string(ws_.reason().reason.data(), ws_.reason().reason.size())
                       : "connection lost: " + ec.message();
        return;
      }
      inbox_.push_back(beast::buffers_to_string(buffer_.data()));
      buffer_.consume(buffer_.size());
      read_next();
    });
  }

  asio::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> inbox_;
  bool failed_ = false;
  bool closed_ = false;
  std::string failure_;
};

Worker::Worker(WorkerConfig cfg, std::shared_ptr<const TaskRegistry> registry)
    : cfg_(std::move(cfg)), registry_(std::move(registry)), cache_(cfg_.cache_bytes), endpoint_(cfg_.endpoint) {
  net::parse_endpoint(endpoint_);
  if (!registry_) throw std::invalid_argument("worker needs a task registry");
}

Worker::~Worker() = default;

WorkerStats Worker::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::string Worker::worker_id() const {
  std::lock_guard lock(mutex_);
  return worker_id_;
}

std::string Worker::endpoint() const {
  std::lock_guard lock(mutex_);
  return endpoint_;
}

namespace {

// Sleeps until the deadline or a stop request.
void interruptible_sleep(std::chrono::milliseconds d, const std::stop_token& stop) {
  std::mutex m;
  std::condition_variable_any cv;
  std::unique_lock lock(m);
  cv.wait_for(lock, stop, d, [] { return false; });
}

}  // namespace

ExitReason Worker::run(std::stop_token stop) {
  DurationMs backoff = cfg_.initial_backoff_ms;
  while (!stop.stop_requested()) {
    Connection conn;
    SessionEnd end = SessionEnd::lost;
    bool connected = false;
    try {
      conn.open(net::parse_endpoint(endpoint()), std::chrono::milliseconds(std::min<DurationMs>(cfg_.max_backoff_ms, 10000)));
      conn.send(make_message(Hello{"", cfg_.user_agent}));
      auto hello = await(conn, stop, MessageKind::hello);
      if (!hello) return ExitReason::stop_requested;
      {
        std::lock_guard lock(mutex_);
        worker_id_ = hello->as<Hello>()->worker_id;
        ++stats_.connects;
      }
      connected = true;
      backoff = cfg_.initial_backoff_ms;
      end = session(conn, stop);
    } catch (const ConnectionLost& e) {
      spdlog::warn("worker {}: {}", worker_id(), e.what());
    } catch (const std::invalid_argument& e) {
      spdlog::error("worker: {}", e.what());
    }
    conn.close();
    switch (end) {
      case SessionEnd::stop_command:
        return ExitReason::stop_command;
      case SessionEnd::stop_requested:
        return ExitReason::stop_requested;
      case SessionEnd::redirect:
        backoff = cfg_.initial_backoff_ms;
        continue;
      case SessionEnd::lost:
        break;
    }
    if (!connected) {
      interruptible_sleep(std::chrono::milliseconds(backoff), stop);
      backoff = std::min(backoff * 2, cfg_.max_backoff_ms);
    } else {
      interruptible_sleep(std::chrono::milliseconds(cfg_.initial_backoff_ms), stop);
    }
  }
  return ExitReason::stop_requested;
}

// Waits for a message of `kind`, queueing control messages that arrive
// first. Any other message is a protocol violation.
std::optional<WireMessage> Worker::await(Connection& conn, std::stop_token stop, MessageKind kind) {
  const auto deadline = Clock::now() + cfg_.reply_timeout;
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) throw ConnectionLost(std::string("timed out waiting for ") + std::string(to_string(kind)));
    auto msg = conn.next(left, stop);
    if (!msg) {
      if (stop.stop_requested()) return std::nullopt;
      continue;
    }
    if (msg->kind() == kind) return msg;
    if (const auto* c = msg->as<Control>()) {
      controls_.push_back(*c);
      continue;
    }
    throw ConnectionLost(std::string("expected ") + std::string(to_string(kind)) + ", got " +
                         std::string(to_string(msg->kind())));
  }
}

// Returns true when the session must end, with the reason in `end`.
bool Worker::apply_controls(SessionEnd& end) {
  auto pending = std::move(controls_);
  controls_.clear();
  for (const auto& c : pending) {
    switch (c.command) {
      case ControlCommand::reload:
        spdlog::info("worker {}: reload", worker_id());
        cache_.clear();
        reset_task_state();
        known_tasks_.clear();
        {
          std::lock_guard lock(mutex_);
          ++stats_.reloads;
        }
        break;
      case ControlCommand::redirect:
        try {
          net::parse_endpoint(c.url);
        } catch (const std::invalid_argument&) {
          spdlog::warn("worker {}: ignoring redirect to invalid url '{}'", worker_id(), c.url);
          break;
        }
        spdlog::info("worker {}: redirect to {}", worker_id(), c.url);
        {
          std::lock_guard lock(mutex_);
          endpoint_ = c.url;
        }
        end = SessionEnd::redirect;
        return true;
      case ControlCommand::stop:
        spdlog::info("worker {}: stop", worker_id());
        end = SessionEnd::stop_command;
        return true;
    }
  }
  return false;
}

Worker::SessionEnd Worker::session(Connection& conn, std::stop_token stop) {
  SessionEnd end = SessionEnd::lost;
  while (true) {
    if (apply_controls(end)) return end;
    if (stop.stop_requested()) return SessionEnd::stop_requested;
    conn.send(make_message(TicketRequest{}));
    WireMessage reply;
    while (true) {
      auto msg = conn.next(cfg_.reply_timeout, stop);
      if (!msg) {
        if (stop.stop_requested()) return SessionEnd::stop_requested;
        throw ConnectionLost("timed out waiting for a ticket");
      }
      if (const auto* c = msg->as<Control>()) {
        controls_.push_back(*c);
        continue;
      }
      reply = std::move(*msg);
      break;
    }
    if (const auto* none = reply.as<NoTicket>()) {
      // idle until the retry hint expires, still reacting to control messages
      const auto until = Clock::now() + std::chrono::milliseconds(none->retry_after_ms);
      while (Clock::now() < until && !stop.stop_requested()) {
        auto msg = conn.next(std::chrono::duration_cast<std::chrono::milliseconds>(until - Clock::now()), stop);
        if (!msg) continue;
        if (const auto* c = msg->as<Control>()) {
          controls_.push_back(*c);
          break;
        }
        throw ConnectionLost("unexpected " + std::string(to_string(msg->kind())) + " while idle");
      }
      continue;
    }
    const auto* grant = reply.as<TicketGrant>();
    if (!grant) throw ConnectionLost("expected ticket_grant or no_ticket, got " + std::string(to_string(reply.kind())));
    handle_grant(conn, stop, *grant);
  }
}

void Worker::submit_error(Connection& conn, TicketId id, std::string message, std::string trace, bool refusal) {
  conn.send(make_message(ErrorSubmit{id, std::move(message), std::move(trace)}));
  {
    std::lock_guard lock(mutex_);
    ++stats_.errors;
    if (refusal) ++stats_.refusals;
  }
}

FetchResult Worker::fetch_resource(const std::string& name) {
  const auto base = net::parse_endpoint(endpoint()).http_base();
  const auto res = net::http_get(base, "/resource/" + name);
  if (res.status != 200)
    throw std::runtime_error("GET /resource/" + name + " returned " + std::to_string(res.status) + ": " + res.body);
  auto it = res.headers.find("x-content-hash");
  return FetchResult{std::make_shared<const std::string>(res.body), it == res.headers.end() ? "" : it->second};
}

void Worker::reset_task_state() { state_.clear(); }

void Worker::handle_grant(Connection& conn, std::stop_token stop, const TicketGrant& grant) {
  const TaskImpl* impl = registry_->find(grant.task_id);
  if (!impl) {
    submit_error(conn, grant.ticket_id, "task '" + grant.task_id + "' is not registered on this worker", "", true);
    return;
  }
  const std::string local_version = impl->descriptor().version;
  if (local_version != grant.task_version) {
    submit_error(conn, grant.ticket_id,
                 "task '" + grant.task_id + "' version " + grant.task_version + " does not match local version " +
                     local_version,
                 "", true);
    return;
  }
  const std::string key = grant.task_id + "@" + grant.task_version;
  if (!known_tasks_.count(key)) {
    conn.send(make_message(TaskRequest{grant.task_id}));
    auto msg = await(conn, stop, MessageKind::task_payload);
    if (!msg) throw ConnectionLost("stopped while waiting for task payload");
    const auto* payload = msg->as<TaskPayload>();
    if (!payload->found || payload->descriptor.version != local_version) {
      submit_error(conn, grant.ticket_id, "coordinator has no matching definition of task '" + grant.task_id + "'", "",
                   true);
      return;
    }
    known_tasks_[key] = payload->resources;
  }

  const auto base = net::parse_endpoint(endpoint()).http_base();
  TaskContext ctx;
  ctx.worker_id = worker_id();
  ctx.state = &state_;
  ctx.fetch = [this](const std::string& name) {
    return cache_.get_or_fetch(name, "", [this](const std::string& n) { return fetch_resource(n); });
  };
  ctx.get = [base](const std::string& target) {
    auto r = net::http_get(base, target);
    return HttpResult{r.status, std::move(r.body)};
  };
  ctx.post = [base](const std::string& target, const std::string& body) {
    auto r = net::http_post(base, target, body);
    return HttpResult{r.status, std::move(r.body)};
  };

  TaskOutcome outcome;
  try {
    for (const auto& ref : known_tasks_[key])
      cache_.get_or_fetch(ref.name, ref.hash, [this](const std::string& n) { return fetch_resource(n); });
    outcome = execute_task(*impl, grant.args, ctx);
  } catch (const std::exception& e) {
    outcome = TaskError{std::string("resource fetch failed: ") + e.what(), current_stacktrace()};
  }

  if (auto* err = std::get_if<TaskError>(&outcome)) {
    spdlog::warn("worker {}: ticket {} failed: {}", worker_id(), grant.ticket_id.value, err->message);
    submit_error(conn, grant.ticket_id, err->message.empty() ? "task failed" : err->message, err->trace, false);
    reset_task_state();
    if (cfg_.on_task_error) cfg_.on_task_error();
    return;
  }
  conn.send(make_message(ResultSubmit{grant.ticket_id, std::move(std::get<Json>(outcome))}));
  auto ack = await(conn, stop, MessageKind::result_ack);
  if (!ack) return;
  std::lock_guard lock(mutex_);
  if (ack->as<ResultAck>()->outcome == SubmitOutcome::accepted) {
    ++stats_.processed;
  } else {
    ++stats_.duplicates;
  }
}

}  // namespace vc::worker
