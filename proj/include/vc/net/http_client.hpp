#pragma once

#include <chrono>
#include <map>
#include <stdexcept>
#include <string>

#include "vc/net/endpoint.hpp"

namespace vc::net {

class HttpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;  // lower-cased names
};

struct HttpRequestOptions {
  std::string method = "GET";
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
  std::chrono::milliseconds timeout{30000};
};

// One request on a fresh connection. Throws HttpError on connection or
// protocol failure; non-2xx statuses are returned, not thrown.
HttpResponse http_request(const Endpoint& server, const std::string& target, const HttpRequestOptions& options = {});

inline HttpResponse http_get(const Endpoint& server, const std::string& target) {
  return http_request(server, target);
}

inline HttpResponse http_post(const Endpoint& server, const std::string& target, std::string body,
                              std::map<std::string, std::string> headers = {}) {
  HttpRequestOptions o;
  o.method = "POST";
  o.body = std::move(body);
  o.headers = std::move(headers);
  return http_request(server, target, o);
}

}  // namespace vc::net
