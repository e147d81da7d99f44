#pragma once

// Canonical value encoding. Every stored value is (kind, payload):
//
//   int     decimal text             float  shortest round-trip decimal
//   bool    true | false             nil    nil
//   str     raw UTF-8                skipped  reason text
//   blob    "<type tag>\n" + bytes
//   list    JSON array of element content hashes
//   map     JSON array of [key, element content hash], keys sorted
//
// Containers reference elements by content hash, so a container's hash
// depends only on what it holds, never on ids assigned by a particular store.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spacetime::store {

namespace kind {
inline constexpr std::string_view Int = "int";
inline constexpr std::string_view Float = "float";
inline constexpr std::string_view Bool = "bool";
inline constexpr std::string_view Str = "str";
inline constexpr std::string_view Nil = "nil";
inline constexpr std::string_view List = "list";
inline constexpr std::string_view Map = "map";
inline constexpr std::string_view Blob = "blob";
inline constexpr std::string_view Skipped = "skipped";
}  // namespace kind

bool is_value_kind(std::string_view k);

// Hex SHA-256 over kind + '\0' + payload.
std::string content_hash(std::string_view kind, std::string_view payload);

std::string encode_list(const std::vector<std::string>& element_hashes);
std::string encode_list(const std::vector<std::string_view>& element_hashes);
// `key_hashes` must already be sorted by key (guest maps iterate sorted).
std::string encode_map(const std::vector<std::pair<std::string, std::string>>& key_hashes);
std::vector<std::string> decode_list(std::string_view payload);
std::vector<std::pair<std::string, std::string>> decode_map(std::string_view payload);

std::string encode_blob(std::string_view type_tag, std::string_view bytes);
std::pair<std::string, std::string> decode_blob(std::string_view payload);

}  // namespace spacetime::store
