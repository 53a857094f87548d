#pragma once

#include <string>
#include <string_view>

namespace sqlens {

/// SHA-256 of the input bytes, lowercase hex.
std::string sha256_hex(std::string_view data);

}  // namespace sqlens
