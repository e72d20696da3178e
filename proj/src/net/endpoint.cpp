#include "vc/net/endpoint.hpp"

#include <charconv>

namespace vc::net {

std::string Endpoint::to_string() const { return scheme + "://" + host + ":" + std::to_string(port) + path; }

Endpoint Endpoint::http_base() const { return Endpoint{"http", host, port, "/"}; }

Endpoint parse_endpoint(std::string_view url) {
  const auto fail = [&]() { return std::invalid_argument("invalid endpoint '" + std::string(url) + "'"); };
  const auto sep = url.find("://");
  if (sep == std::string_view::npos) throw fail();
  Endpoint e;
  e.scheme = std::string(url.substr(0, sep));
  if (e.scheme != "ws" && e.scheme != "http") throw fail();
  std::string_view rest = url.substr(sep + 3);
  const auto slash = rest.find('/');
  std::string_view authority = rest.substr(0, slash);
  e.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  const auto colon = authority.rfind(':');
  if (colon == std::string_view::npos) {
    e.host = std::string(authority);
    e.port = 80;
  } else {
    e.host = std::string(authority.substr(0, colon));
    const auto port = authority.substr(colon + 1);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc() || ptr != port.data() + port.size() || value == 0 || value > 65535) throw fail();
    e.port = static_cast<std::uint16_t>(value);
  }
  if (e.host.empty()) throw fail();
  return e;
}

}  // namespace vc::net
