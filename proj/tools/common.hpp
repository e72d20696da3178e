#pragma once

#include <atomic>
#include <csignal>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace vc::tools {

inline std::atomic<bool> g_interrupted{false};

inline void install_signal_handlers() {
  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGTERM, [](int) { g_interrupted = true; });
}

// "host:port" or ":port" or "port".
inline std::pair<std::string, std::uint16_t> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : bind.substr(0, colon);
  const std::string port = colon == std::string::npos ? bind : bind.substr(colon + 1);
  if (host.empty()) host = "0.0.0.0";
  const int p = std::stoi(port);
  if (p < 0 || p > 65535) throw std::invalid_argument("port out of range: " + port);
  return {host, static_cast<std::uint16_t>(p)};
}

}  // namespace vc::tools
