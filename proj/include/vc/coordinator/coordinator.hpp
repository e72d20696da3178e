#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vc/coordinator/resource_store.hpp"
#include "vc/protocol/message.hpp"
#include "vc/scheduler/service.hpp"
#include "vc/util/json.hpp"

namespace vc::coord {

class CoordinatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CoordinatorConfig {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  std::string ws_path = "/distributor";
  std::filesystem::path resource_root = ".";
  std::optional<std::filesystem::path> static_root;
  std::optional<std::string> admin_token;
  DurationMs no_ticket_retry_ms = 1000;
  int io_threads = 2;
};

struct HttpRequest {
  std::string method;
  std::string target;  // path without the query string
  std::string query;
  std::map<std::string, std::string> headers;  // lower-cased names
  std::string body;

  std::string header(const std::string& name) const {
    auto it = headers.find(name);
    return it == headers.end() ? std::string() : it->second;
  }
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;

  static HttpReply json(int status, const Json& body) { return {status, body.dump(), "application/json", {}}; }
  static HttpReply error(int status, const std::string& message) { return json(status, Json{{"error", message}}); }
};

// Routes may answer later, from any thread.
using Responder = std::function<void(HttpReply)>;
using Route = std::function<void(const HttpRequest&, Responder)>;

Json to_json(const sched::ProjectStats& stats);

// HTTP and the WebSocket distributor on one listening port.
class Coordinator {
 public:
  Coordinator(CoordinatorConfig cfg, std::shared_ptr<sched::SchedulerService> service);
  ~Coordinator();
  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  // Binds and starts the I/O threads; throws CoordinatorError on bind failure.
  void start();
  // Closes all sessions, joins the I/O threads and flushes the journal.
  void stop();
  void wait();
  bool running() const;

  std::uint16_t port() const;
  std::string ws_url() const;
  std::string http_url() const;

  const CoordinatorConfig& config() const;
  sched::SchedulerService& service();
  ResourceStore& resources();

  // Exact match on method and path; installed routes take precedence over
  // the built-in ones.
  void add_route(const std::string& method, const std::string& path, Route route);

  // Sends a control message to every live session; returns the count.
  std::size_t broadcast(const protocol::Control& control);
  std::vector<std::string> session_ids() const;

  Json status_json() const;

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace vc::coord
