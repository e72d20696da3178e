#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vc::net {

// scheme://host:port/path for ws and http URLs.
struct Endpoint {
  std::string scheme;
  std::string host;
  std::uint16_t port = 0;
  std::string path = "/";

  std::string to_string() const;
  // The same host and port under http://, used for resource fetches.
  Endpoint http_base() const;
};

Endpoint parse_endpoint(std::string_view url);

}  // namespace vc::net
