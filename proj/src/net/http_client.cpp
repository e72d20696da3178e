#include "vc/net/http_client.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>

#include <algorithm>
#include <cctype>

namespace vc::net {

namespace beast = boost::beast;
namespace http = beast::http;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

HttpResponse http_request(const Endpoint& server, const std::string& target, const HttpRequestOptions& options) {
  asio::io_context ioc;
  beast::tcp_stream stream(ioc);
  beast::error_code failure;
  HttpResponse out;

  http::request<http::string_body> req{http::string_to_verb(options.method), target, 11};
  if (req.method() == http::verb::unknown) throw HttpError("unknown HTTP method " + options.method);
  req.set(http::field::host, server.host);
  req.set(http::field::user_agent, "vc-http");
  for (const auto& [k, v] : options.headers) req.set(k, v);
  if (!options.body.empty() || req.method() == http::verb::post) {
    req.set(http::field::content_type, options.content_type);
    req.body() = options.body;
  }
  req.prepare_payload();

  beast::flat_buffer buffer;
  http::response_parser<http::string_body> parser;
  parser.body_limit(1ull << 32);
  tcp::resolver resolver(ioc);

  stream.expires_after(options.timeout);
  resolver.async_resolve(server.host, std::to_string(server.port), [&](beast::error_code ec, tcp::resolver::results_type r) {
    if (ec) {
      failure = ec;
      return;
    }
    stream.async_connect(r, [&](beast::error_code ec, const tcp::endpoint&) {
      if (ec) {
        failure = ec;
        return;
      }
      stream.socket().set_option(tcp::no_delay(true), ec);
      http::async_write(stream, req, [&](beast::error_code ec, std::size_t) {
        if (ec) {
          failure = ec;
          return;
        }
        http::async_read(stream, buffer, parser, [&](beast::error_code ec, std::size_t) {
          if (ec) failure = ec;
        });
      });
    });
  });
  ioc.run();
  if (failure)
    throw HttpError(options.method + " " + server.host + ":" + std::to_string(server.port) + target + ": " +
                    failure.message());

  auto res = parser.release();
  out.status = static_cast<int>(res.result_int());
  out.body = std::move(res.body());
  for (const auto& field : res) {
    std::string name(field.name_string());
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    out.headers[name] = std::string(field.value());
  }
  beast::error_code ignored;
  stream.socket().shutdown(tcp::socket::shutdown_both, ignored);
  return out;
}

}  // namespace vc::net
