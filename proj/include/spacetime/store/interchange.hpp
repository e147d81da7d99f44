#pragma once

// Line-delimited interchange stream. The first line is a manifest
//   {"record": "manifest", "format_version", "program_hash", "counts"}
// followed by one {"table": name, ...fields} object per row, keys sorted,
// tables in a fixed order and rows ordered by id (payloads by hash).

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spacetime/store/store.hpp"

namespace spacetime::store {

extern const std::vector<std::string> kTableOrder;

// With `sessions`, exports only those sessions (plus their ancestors) and
// the rows they reference.
void export_stream(const Store& store, std::ostream& out,
                   const std::optional<std::vector<Id>>& sessions = std::nullopt);
std::string export_string(const Store& store, const std::optional<std::vector<Id>>& sessions = std::nullopt);

// Throws StoreError naming the 1-based record index on malformed input or a
// dangling reference.
std::unique_ptr<Store> import_stream(std::istream& in);
std::unique_ptr<Store> import_string(const std::string& text);

// Per-table SHA-256 over the table's stream records.
std::map<std::string, std::string> table_digests(const Store& store);

}  // namespace spacetime::store
