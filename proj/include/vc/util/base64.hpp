#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vc {

class Base64Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string base64_encode(std::string_view bytes);

// Strict decoder: rejects lengths that are not a multiple of four,
// characters outside the standard alphabet and misplaced padding.
std::string base64_decode(std::string_view text);

}  // namespace vc
