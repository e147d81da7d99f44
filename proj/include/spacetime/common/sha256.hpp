#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace spacetime {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view data);
// Digest of the concatenation of `parts`, without building it.
Digest sha256(std::initializer_list<std::string_view> parts);
std::string sha256_hex(std::string_view data);
std::string to_hex(std::string_view bytes);
// Throws std::invalid_argument on odd length or non-hex characters.
std::string from_hex(std::string_view hex);

}  // namespace spacetime
