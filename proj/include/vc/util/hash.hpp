#pragma once

#include <span>
#include <string>
#include <string_view>

namespace vc {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

}  // namespace vc
