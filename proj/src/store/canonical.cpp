#include "spacetime/store/canonical.hpp"

#include <stdexcept>

#include <json.hpp>

#include "spacetime/common/sha256.hpp"

namespace spacetime::store {

using nlohmann::json;

bool is_value_kind(std::string_view k) {
  return k == kind::Int || k == kind::Float || k == kind::Bool || k == kind::Str || k == kind::Nil ||
         k == kind::List || k == kind::Map || k == kind::Blob || k == kind::Skipped;
}

std::string content_hash(std::string_view kind, std::string_view payload) {
  Digest d = sha256({kind, std::string_view("\0", 1), payload});
  return to_hex(std::string_view(reinterpret_cast<const char*>(d.data()), d.size()));
}

std::string encode_list(const std::vector<std::string>& element_hashes) {
  return encode_list(std::vector<std::string_view>(element_hashes.begin(), element_hashes.end()));
}

std::string encode_list(const std::vector<std::string_view>& element_hashes) {
  std::size_t size = 2;
  for (auto h : element_hashes) size += h.size() + 3;
  std::string out;
  out.reserve(size);
  out += '[';
  for (std::size_t i = 0; i < element_hashes.size(); ++i) {
    if (i) out += ',';
    out += '"';
    out += element_hashes[i];
    out += '"';
  }
  out += ']';
  return out;
}

std::string encode_map(const std::vector<std::pair<std::string, std::string>>& key_hashes) {
  json arr = json::array();
  for (const auto& [k, h] : key_hashes) arr.push_back(json::array({k, h}));
  return arr.dump();
}

std::vector<std::string> decode_list(std::string_view payload) {
  std::vector<std::string> out;
  for (const auto& e : json::parse(payload)) out.push_back(e.get<std::string>());
  return out;
}

std::vector<std::pair<std::string, std::string>> decode_map(std::string_view payload) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : json::parse(payload)) out.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  return out;
}

std::string encode_blob(std::string_view type_tag, std::string_view bytes) {
  std::string out(type_tag);
  out += '\n';
  out.append(bytes);
  return out;
}

std::pair<std::string, std::string> decode_blob(std::string_view payload) {
  auto nl = payload.find('\n');
  if (nl == std::string_view::npos) throw std::runtime_error("malformed blob payload");
  return {std::string(payload.substr(0, nl)), std::string(payload.substr(nl + 1))};
}

}  // namespace spacetime::store
