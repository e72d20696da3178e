#include "vc/coordinator/coordinator.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace vc::coord {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using namespace protocol;

Json to_json(const sched::ProjectStats& stats) {
  Json clients = Json::array();
  for (const auto& c : stats.clients)
    clients.push_back({{"worker_id", c.worker_id}, {"user_agent", c.user_agent}, {"connected_at", c.connected_at}});
  return Json{{"name", stats.name},
              {"tasks", stats.counters.tasks},
              {"pending", stats.counters.pending},
              {"executed", stats.counters.executed},
              {"errors", stats.counters.errors},
              {"failed", stats.counters.failed},
              {"clients", std::move(clients)}};
}

namespace {

std::string url_decode(std::string_view in) {
  std::string out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '%' && i + 2 < in.size() && std::isxdigit(static_cast<unsigned char>(in[i + 1])) &&
        std::isxdigit(static_cast<unsigned char>(in[i + 2]))) {
      out.push_back(static_cast<char>(std::stoi(std::string(in.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(in[i]);
    }
  }
  return out;
}

std::string content_type_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js") return "text/javascript";
  if (ext == ".json") return "application/json";
  if (ext == ".css") return "text/css";
  return "application/octet-stream";
}

}  // namespace

class WsSession;

struct Coordinator::Impl : std::enable_shared_from_this<Coordinator::Impl> {
  Impl(CoordinatorConfig c, std::shared_ptr<sched::SchedulerService> s)
      : cfg(std::move(c)), service(std::move(s)), resources(cfg.resource_root), acceptor(ioc) {}

  CoordinatorConfig cfg;
  std::shared_ptr<sched::SchedulerService> service;
  ResourceStore resources;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;
  std::uint16_t port = 0;
  std::atomic<bool> is_running{false};
  std::atomic<std::uint64_t> next_worker{1};

  mutable std::mutex mutex;
  std::map<std::pair<std::string, std::string>, Route> routes;
  std::map<std::string, std::weak_ptr<WsSession>> sessions;

  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopped = false;

  void do_accept();
  void handle_http(const HttpRequest& req, const Responder& respond);
  void builtin(const HttpRequest& req, const Responder& respond);
  HttpReply console(const HttpRequest& req);
  HttpReply serve_resource(const std::string& name);
  HttpReply serve_static(const std::string& name);
  std::size_t broadcast(const Control& control);
  Json status_json() const;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, std::shared_ptr<Coordinator::Impl> impl) : ws_(std::move(socket)), impl_(std::move(impl)) {}

  void accept(http::request<http::string_body> req) {
    beast::get_lowest_layer(ws_).expires_never();
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(64u << 20);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->do_read();
    });
  }

  // Callable from any thread.
  void post_send(WireMessage msg) {
    asio::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg)] { self->send(msg); });
  }

  void post_shutdown() {
    asio::post(ws_.get_executor(), [self = shared_from_this()] {
      beast::error_code ec;
      beast::get_lowest_layer(self->ws_).socket().close(ec);
    });
  }

  const std::string& worker_id() const { return worker_id_; }

 private:
  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      on_closed();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    handle(text);
    if (!closing_) do_read();
  }

  void handle(const std::string& text) {
    WireMessage msg;
    try {
      msg = decode_message(text);
    } catch (const DecodeError& e) {
      protocol_close(std::string("protocol error: ") + e.what());
      return;
    }
    if (!hello_ && msg.kind() != MessageKind::hello) {
      protocol_close("protocol error: expected hello");
      return;
    }
    try {
      std::visit([&](const auto& body) { on_message(body); }, msg.body);
    } catch (const std::exception& e) {
      spdlog::error("session {}: {}", worker_id_, e.what());
      protocol_close(std::string("internal error: ") + e.what());
    }
  }

  void on_message(const Hello& hello) {
    if (hello_) return protocol_close("protocol error: duplicate hello");
    hello_ = true;
    worker_id_ = "w" + std::to_string(impl_->next_worker++);
    {
      std::lock_guard lock(impl_->mutex);
      impl_->sessions[worker_id_] = weak_from_this();
    }
    impl_->service->client_connected(worker_id_, hello.user_agent);
    send(make_message(Hello{worker_id_, "vc-coordinator"}));
  }

  void on_message(const TicketRequest&) {
    auto ticket = impl_->service->next_ticket(worker_id_);
    if (!ticket) {
      send(make_message(NoTicket{impl_->cfg.no_ticket_retry_ms}));
      return;
    }
    const auto desc = impl_->service->descriptor(ticket->task_id);
    in_flight_.insert(ticket->ticket_id.value);
    send(make_message(TicketGrant{ticket->ticket_id, ticket->project_id, ticket->task_id,
                                  desc ? desc->version : std::string(), ticket->input_index, ticket->args}));
  }

  void on_message(const TaskRequest& req) {
    TaskPayload payload;
    const auto desc = impl_->service->descriptor(req.task_id);
    payload.found = desc.has_value();
    if (desc) {
      payload.descriptor = *desc;
      for (const auto& dep : desc->resource_deps) {
        std::string hash;
        try {
          hash = impl_->resources.hash(dep).value_or("");
        } catch (const ResourceAccessError&) {
        }
        payload.resources.push_back({dep, hash});
      }
    }
    send(make_message(std::move(payload)));
  }

  void on_message(const ResultSubmit& submit) {
    in_flight_.erase(submit.ticket_id.value);
    const auto outcome = impl_->service->submit_result(submit.ticket_id, worker_id_, submit.result);
    send(make_message(ResultAck{submit.ticket_id, outcome}));
  }

  void on_message(const ErrorSubmit& err) {
    in_flight_.erase(err.ticket_id.value);
    ErrorReport report{err.ticket_id, worker_id_, err.message.empty() ? "unspecified error" : err.message, err.trace,
                       impl_->service->now()};
    impl_->service->record_error(std::move(report));
  }

  template <typename Other>
  void on_message(const Other&) {
    protocol_close(std::string("protocol error: unexpected ") + std::string(protocol::to_string(Other::kind)) +
                   " from worker");
  }

  void send(const WireMessage& msg) {
    if (closing_) return;
    outbox_.push_back(encode_message(msg));
    if (outbox_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) {
        self->do_write();
      } else if (self->closing_) {
        self->do_close();
      }
    });
  }

  void protocol_close(const std::string& reason) {
    spdlog::warn("closing session {}: {}", worker_id_.empty() ? "(no hello)" : worker_id_, reason);
    closing_ = true;
    close_reason_ = reason.substr(0, 120);
    if (outbox_.empty()) do_close();
  }

  void do_close() {
    ws_.async_close(websocket::close_reason(websocket::close_code::policy_error, close_reason_),
                    [self = shared_from_this()](beast::error_code) { self->on_closed(); });
  }

  void on_closed() {
    if (closed_) return;
    closed_ = true;
    if (!hello_) return;
    {
      std::lock_guard lock(impl_->mutex);
      impl_->sessions.erase(worker_id_);
    }
    impl_->service->client_disconnected(worker_id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::shared_ptr<Coordinator::Impl> impl_;
  std::deque<std::string> outbox_;
  std::string worker_id_;
  std::string close_reason_;
  std::set<std::uint64_t> in_flight_;
  bool hello_ = false;
  bool closing_ = false;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, std::shared_ptr<Coordinator::Impl> impl)
      : stream_(std::move(socket)), impl_(std::move(impl)) {}

  void run() {
    asio::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->do_read(); });
  }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(256u << 20);
    stream_.expires_after(std::chrono::seconds(120));
    http::async_read(stream_, buffer_, *parser_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    auto req = parser_->release();
    const std::string target(req.target());
    const std::string path = target.substr(0, target.find('?'));
    if (websocket::is_upgrade(req)) {
      if (path == impl_->cfg.ws_path) {
        std::make_shared<WsSession>(stream_.release_socket(), impl_)->accept(std::move(req));
        return;
      }
      write(HttpReply::error(404, "no websocket endpoint at " + path), false, req.version());
      return;
    }

    HttpRequest r;
    r.method = std::string(req.method_string());
    r.target = path;
    if (auto q = target.find('?'); q != std::string::npos) r.query = target.substr(q + 1);
    for (const auto& f : req) {
      std::string name(f.name_string());
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
      r.headers[name] = std::string(f.value());
    }
    r.body = std::move(req.body());
    const bool keep_alive = req.keep_alive();
    const unsigned version = req.version();
    auto self = shared_from_this();
    auto answered = std::make_shared<std::atomic<bool>>(false);
    Responder respond = [self, keep_alive, version, answered](HttpReply reply) {
      if (answered->exchange(true)) return;
      asio::post(self->stream_.get_executor(), [self, keep_alive, version, reply = std::move(reply)]() mutable {
        self->write(std::move(reply), keep_alive, version);
      });
    };
    try {
      impl_->handle_http(r, respond);
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", r.method, r.target, e.what());
      respond(HttpReply::error(500, e.what()));
    }
  }

  void write(HttpReply reply, bool keep_alive, unsigned version) {
    auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(reply.status), version);
    res->set(http::field::server, "vc-coordinator");
    res->set(http::field::content_type, reply.content_type);
    for (const auto& [k, v] : reply.headers) res->set(k, v);
    res->keep_alive(keep_alive);
    res->body() = std::move(reply.body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  std::shared_ptr<Coordinator::Impl> impl_;
};

void Coordinator::Impl::do_accept() {
  acceptor.async_accept(asio::make_strand(ioc), [self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (!self->is_running || !self->acceptor.is_open()) return;
      if (ec != asio::error::operation_aborted) spdlog::warn("accept failed: {}", ec.message());
    } else {
      socket.set_option(tcp::no_delay(true), ec);
      std::make_shared<HttpSession>(std::move(socket), self)->run();
    }
    self->do_accept();
  });
}

void Coordinator::Impl::handle_http(const HttpRequest& req, const Responder& respond) {
  Route route;
  {
    std::lock_guard lock(mutex);
    if (auto it = routes.find({req.method, req.target}); it != routes.end()) route = it->second;
  }
  if (route) return route(req, respond);
  builtin(req, respond);
}

void Coordinator::Impl::builtin(const HttpRequest& req, const Responder& respond) {
  static const std::string kResource = "/resource/";
  if (req.method == "GET" && req.target == "/status") return respond(HttpReply::json(200, status_json()));
  if (req.target == "/console") {
    if (req.method != "POST") return respond(HttpReply::error(405, "use POST"));
    return respond(console(req));
  }
  if (req.method == "GET" && req.target.rfind(kResource, 0) == 0)
    return respond(serve_resource(url_decode(req.target.substr(kResource.size()))));
  if (req.method == "GET" && cfg.static_root) {
    std::string name = url_decode(req.target.substr(1));
    if (name.empty()) name = "worker.html";
    return respond(serve_static(name));
  }
  respond(HttpReply::error(404, "no route for " + req.method + " " + req.target));
}

HttpReply Coordinator::Impl::console(const HttpRequest& req) {
  if (cfg.admin_token && req.header("x-admin-token") != *cfg.admin_token)
    return HttpReply::error(401, "bad admin token");
  Json body;
  try {
    body = Json::parse(req.body);
  } catch (const Json::parse_error&) {
    return HttpReply::error(400, "console body must be JSON");
  }
  if (!body.is_object() || !body.contains("command") || !body["command"].is_string())
    return HttpReply::error(400, "missing command");
  const auto command = control_command_from_string(body["command"].get<std::string>());
  if (!command) return HttpReply::error(400, "unknown command '" + body["command"].get<std::string>() + "'");
  Control control{*command, {}};
  if (*command == ControlCommand::redirect) {
    if (!body.contains("url") || !body["url"].is_string() || body["url"].get<std::string>().empty())
      return HttpReply::error(400, "redirect needs a url");
    control.url = body["url"].get<std::string>();
  }
  const auto delivered = broadcast(control);
  spdlog::info("console {} delivered to {} sessions", protocol::to_string(*command), delivered);
  return HttpReply::json(200, Json{{"command", protocol::to_string(*command)}, {"delivered", delivered}});
}

HttpReply Coordinator::Impl::serve_resource(const std::string& name) {
  std::optional<Resource> r;
  try {
    r = resources.get(name);
  } catch (const ResourceAccessError& e) {
    return HttpReply::error(403, e.what());
  }
  if (!r) return HttpReply::error(404, "unknown resource '" + name + "'");
  return HttpReply{200, *r->bytes, "application/octet-stream", {{"X-Content-Hash", r->hash}, {"ETag", "\"" + r->hash + "\""}}};
}

HttpReply Coordinator::Impl::serve_static(const std::string& name) {
  if (!ResourceStore::valid_name(name)) return HttpReply::error(403, "invalid path");
  const auto path = *cfg.static_root / name;
  std::ifstream in(path, std::ios::binary);
  if (!in) return HttpReply::error(404, "not found: " + name);
  std::ostringstream buf;
  buf << in.rdbuf();
  return HttpReply{200, buf.str(), content_type_for(path), {}};
}

std::size_t Coordinator::Impl::broadcast(const Control& control) {
  std::vector<std::shared_ptr<WsSession>> live;
  {
    std::lock_guard lock(mutex);
    for (auto& [id, weak] : sessions)
      if (auto s = weak.lock()) live.push_back(std::move(s));
  }
  for (auto& s : live) s->post_send(make_message(control));
  return live.size();
}

Json Coordinator::Impl::status_json() const {
  Json projects = Json::array();
  for (const auto& s : service->all_stats()) projects.push_back(to_json(s));
  Json clients = Json::array();
  for (const auto& c : service->inspect([](const sched::Scheduler& s) { return s.clients(); }))
    clients.push_back({{"worker_id", c.worker_id}, {"user_agent", c.user_agent}, {"connected_at", c.connected_at}});
  return Json{{"projects", std::move(projects)}, {"clients", std::move(clients)}};
}

Coordinator::Coordinator(CoordinatorConfig cfg, std::shared_ptr<sched::SchedulerService> service) {
  if (!service) throw CoordinatorError("coordinator needs a scheduler service");
  try {
    impl_ = std::make_shared<Impl>(std::move(cfg), std::move(service));
  } catch (const std::runtime_error& e) {
    throw CoordinatorError(e.what());
  }
}

Coordinator::~Coordinator() { stop(); }

void Coordinator::start() {
  if (impl_->is_running) return;
  beast::error_code ec;
  const auto address = asio::ip::make_address(impl_->cfg.bind_address, ec);
  if (ec) throw CoordinatorError("invalid bind address '" + impl_->cfg.bind_address + "'");
  const tcp::endpoint ep(address, impl_->cfg.port);
  auto& acc = impl_->acceptor;
  acc.open(ep.protocol(), ec);
  if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(ep, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    beast::error_code ignored;
    acc.close(ignored);
    throw CoordinatorError("cannot listen on " + impl_->cfg.bind_address + ":" + std::to_string(impl_->cfg.port) +
                           ": " + ec.message());
  }
  impl_->port = acc.local_endpoint().port();
  impl_->is_running = true;
  impl_->do_accept();
  const int n = std::max(1, impl_->cfg.io_threads);
  for (int i = 0; i < n; ++i) impl_->threads.emplace_back([impl = impl_] { impl->ioc.run(); });
  spdlog::info("coordinator listening on {}:{}", impl_->cfg.bind_address, impl_->port);
}

void Coordinator::stop() {
  if (!impl_ || !impl_->is_running.exchange(false)) return;
  asio::post(impl_->ioc, [impl = impl_] {
    beast::error_code ec;
    impl->acceptor.close(ec);
  });
  std::vector<std::shared_ptr<WsSession>> live;
  {
    std::lock_guard lock(impl_->mutex);
    for (auto& [id, weak] : impl_->sessions)
      if (auto s = weak.lock()) live.push_back(std::move(s));
  }
  for (auto& s : live) s->post_shutdown();
  live.clear();
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  impl_->ioc.stop();
  for (auto& t : impl_->threads)
    if (t.joinable()) t.join();
  impl_->threads.clear();
  impl_->service->flush();
  {
    std::lock_guard lock(impl_->stop_mutex);
    impl_->stopped = true;
  }
  impl_->stop_cv.notify_all();
}

void Coordinator::wait() {
  std::unique_lock lock(impl_->stop_mutex);
  impl_->stop_cv.wait(lock, [&] { return impl_->stopped; });
}

bool Coordinator::running() const { return impl_->is_running; }
std::uint16_t Coordinator::port() const { return impl_->port; }
std::string Coordinator::ws_url() const {
  return "ws://" + impl_->cfg.bind_address + ":" + std::to_string(impl_->port) + impl_->cfg.ws_path;
}
std::string Coordinator::http_url() const {
  return "http://" + impl_->cfg.bind_address + ":" + std::to_string(impl_->port);
}
const CoordinatorConfig& Coordinator::config() const { return impl_->cfg; }
sched::SchedulerService& Coordinator::service() { return *impl_->service; }
ResourceStore& Coordinator::resources() { return impl_->resources; }

void Coordinator::add_route(const std::string& method, const std::string& path, Route route) {
  std::lock_guard lock(impl_->mutex);
  impl_->routes[{method, path}] = std::move(route);
}

std::size_t Coordinator::broadcast(const Control& control) { return impl_->broadcast(control); }

std::vector<std::string> Coordinator::session_ids() const {
  std::lock_guard lock(impl_->mutex);
  std::vector<std::string> ids;
  for (const auto& [id, weak] : impl_->sessions)
    if (!weak.expired()) ids.push_back(id);
  return ids;
}

Json Coordinator::status_json() const { return impl_->status_json(); }

}  // namespace vc::coord
