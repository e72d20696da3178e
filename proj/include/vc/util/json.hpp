#pragma once

#include <json.hpp>

namespace vc {

// Insertion-ordered JSON keeps encoded documents byte-stable.
using Json = nlohmann::ordered_json;

}  // namespace vc
